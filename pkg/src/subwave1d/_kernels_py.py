"""Pure-Python versions of the hot loops; used when the extension is absent."""

from __future__ import annotations

import numpy as np


def continue_branch(roots, start):
    """Flip signs of ``roots`` so consecutive values stay closest to each other.

    ``roots[k]`` is one square root at node ``k``; the returned array picks
    ``+roots[k]`` or ``-roots[k]``, starting from the sign nearest ``start``.
    Also returns the largest phase jump between consecutive chosen values.
    """
    roots = np.asarray(roots, dtype=complex)
    out = np.empty_like(roots)
    prev = complex(start)
    first = prev
    jump = 0.0
    for k in range(roots.size):
        c = complex(roots[k])
        if abs(c - prev) > abs(c + prev):
            c = -c
        if k > 0 and prev != 0 and c != 0:
            jump = max(jump, abs(np.angle(c / prev)))
        out[k] = c
        prev = c
    if roots.size and first != 0 and out[0] != 0:
        jump = max(jump, abs(np.angle(out[0] / first)))
    return out, jump


def wilson_sum(bra, ket):
    """Sum over ``k`` of ``arg <bra_k, ket_{k+1}>`` with periodic closure.

    ``bra`` and ``ket`` are ``(K, N)``.  Returns ``(phase_sum, min_abs_overlap)``.
    """
    bra = np.asarray(bra, dtype=complex)
    ket = np.asarray(ket, dtype=complex)
    ov = np.einsum("kn,kn->k", bra.conj(), np.roll(ket, -1, axis=0))
    return float(np.sum(np.angle(ov))), float(np.min(np.abs(ov)))
