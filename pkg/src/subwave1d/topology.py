"""Zak phases: discrete Wilson loops and the closed-form dimer path integral."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .capacitance import BandStructure
from .errors import (
    ConvergenceError,
    DegenerateBandError,
    UnsupportedConfigurationError,
    ValidationError,
)

__all__ = [
    "ZakResult",
    "wrap_phase",
    "zak_hermitian",
    "zak_nonhermitian",
    "path_integral_term",
    "zak_path_integral",
    "randomise_gauge",
]

DEGENERACY_TOL = 1e-8
MAX_CONDITION = 1e8
MIN_NODES = 4096


def wrap_phase(z: float) -> float:
    """Representative of ``z`` modulo ``2 pi`` in ``(-pi, pi]``."""
    return float(np.pi - np.mod(np.pi - z, 2 * np.pi))


@dataclass(frozen=True)
class ZakResult:
    band: int  # 1-based
    value: float  # in (-pi, pi]
    method: str  # "wilson" | "path-integral"
    grid: int
    error_estimate: float
    nonquantised_term: float | None = None

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "zak": self.value,
            "nonquantised_term": self.nonquantised_term,
            "method": self.method,
            "grid": self.grid,
            "error_estimate": self.error_estimate,
        }


def _check_band(band: BandStructure, j: int) -> int:
    if not 1 <= j <= band.N:
        raise ValidationError(f"band index must be in 1..{band.N}, got {j}")
    if band.alphas.size < 2:
        raise ValidationError("a Wilson loop needs at least two quasi-momenta")
    return j - 1


def _check_gap(band: BandStructure, col: int, tol: float) -> None:
    if band.N == 1:
        return
    lam = band.eigenvalues
    others = np.delete(lam, col, axis=1)
    gaps = np.min(np.abs(others - lam[:, col : col + 1]), axis=1)
    scale = max(np.max(np.abs(lam)), 1e-300)
    k = int(np.argmin(gaps))
    if gaps[k] <= tol * scale:
        raise DegenerateBandError(col + 1, float(band.alphas[k]), float(gaps[k]))


def _error_estimate(loop, vectors) -> float:
    """Difference to the same loop on every other sample (needs an even grid)."""
    K = vectors[0].shape[0]
    if K < 4 or K % 2:
        return float("nan")
    full = loop(*vectors)
    half = loop(*(v[::2] for v in vectors))
    return abs(wrap_phase(full - half))


def zak_hermitian(band: BandStructure, j: int, degeneracy_tol: float = DEGENERACY_TOL) -> ZakResult:
    """Wilson loop ``-Im sum_k log <u_k, u_{k+1}>`` for band ``j`` (1-based).

    The overlap uses the energy inner product weighted by ``ell_i / v_i^2``,
    under which the generalised capacitance matrix is self-adjoint.
    """
    col = _check_band(band, j)
    if not band.hermitian:
        raise UnsupportedConfigurationError("Hermitian Zak phase needs real speeds")
    _check_gap(band, col, degeneracy_tol)
    u = band.right[:, :, col]
    bra = u * band.metric[None, :]

    def loop(b, k):
        return -kernels.wilson_sum(b, k)[0]

    value = loop(bra, u)
    return ZakResult(j, wrap_phase(value), "wilson", u.shape[0], _error_estimate(loop, (bra, u)))


def zak_nonhermitian(band: BandStructure, j: int, degeneracy_tol: float = DEGENERACY_TOL,
                     max_condition: float = MAX_CONDITION) -> ZakResult:
    """Bi-orthogonal Wilson loop for band ``j`` (1-based).

    Uses the symmetric form
    ``-1/2 Im sum_k [log <v_k, u_{k+1}> - log <v_{k+1}, u_k>]``, which
    converges like ``K^-2`` and reduces to :func:`zak_hermitian` when left and
    right eigenvectors coincide.
    """
    col = _check_band(band, j)
    _check_gap(band, col, degeneracy_tol)
    conds = np.linalg.cond(band.right)
    k = int(np.argmax(conds))
    if conds[k] > max_condition:
        raise DegenerateBandError(j, float(band.alphas[k]), 1.0 / conds[k])
    u = band.right[:, :, col]
    v = band.left[:, :, col]

    def loop(vv, uu):
        return -0.5 * (kernels.wilson_sum(vv, uu)[0] + kernels.wilson_sum(uu, vv)[0])

    value = loop(v, u)
    return ZakResult(j, wrap_phase(value), "wilson", u.shape[0], _error_estimate(loop, (v, u)))


def _path_integral(s_1, s_2, v_1, v_2, nodes, max_refine=4):
    """Return ``(p, sigma)``; ``sigma = +-1`` is the branch of the continued
    root at the point of the path nearest the origin, relative to
    ``a (v_1^2 - v_2^2)``."""
    if s_1 <= 0 or s_2 <= 0:
        raise ValidationError("spacings must be positive")
    if v_1 == 0 or v_2 == 0:
        raise ValidationError("speeds must be nonzero")
    if nodes < MIN_NODES or nodes % 2:
        raise ValidationError(f"path integral needs an even number of at least {MIN_NODES} nodes")
    v1s, v2s = complex(v_1) ** 2, complex(v_2) ** 2
    a = 1.0 / s_1 + 1.0 / s_2
    if v1s == v2s:
        return 0.0, 1
    for _ in range(max_refine + 1):
        h = 2 * np.pi / nodes
        t = (np.arange(nodes) + 0.5) * h
        e = np.exp(1j * t)
        z = 1.0 / s_1 + e / s_2
        dz = 1j * e / s_2
        f = a * a * (v1s - v2s) ** 2 + 4 * v1s * v2s * np.abs(z) ** 2
        fmax = np.max(np.abs(f))
        if np.min(np.abs(f)) <= DEGENERACY_TOL * fmax:
            raise DegenerateBandError(0, float(t[np.argmin(np.abs(f))]), float(np.min(np.abs(f))))
        root, jump = kernels.continue_branch(np.sqrt(f), a * (v1s + v2s))
        if jump <= np.pi / 2:
            integral = np.sum(dz / (z * root)) * h
            p = float(0.5 * np.imag(a * (v2s - v1s) * integral))
            near = root[nodes // 2]  # t just past pi, where |z| is smallest
            sigma = 1 if (near / (a * (v1s - v2s))).real >= 0 else -1
            return p, sigma
        nodes *= 2
    raise ConvergenceError("square-root branch jumps between nodes even after refinement")


def path_integral_term(s_1: float, s_2: float, v_1: complex, v_2: complex,
                       nodes: int = MIN_NODES) -> float:
    """Non-quantised part ``p`` of the dimer Zak phase.

    ``p = 1/2 Im[a (v_2^2 - v_1^2) \\oint dz / (z sqrt(f(z)))]`` along
    ``gamma(t) = 1/s_1 + e^{it}/s_2`` with ``a = 1/s_1 + 1/s_2`` and
    ``f(z) = a^2 (v_1^2 - v_2^2)^2 + 4 v_1^2 v_2^2 |z|^2``.  The square root is
    continued along the path from ``a (v_1^2 + v_2^2)`` at ``t = 0`` (the
    acoustic-band root, equal to the principal root for real speeds).
    Midpoint nodes give the principal value when the path crosses ``z = 0``.
    """
    return _path_integral(s_1, s_2, v_1, v_2, nodes)[0]


def zak_path_integral(s_1: float, s_2: float, v_1: complex, v_2: complex, L: float | None = None,
                      j: int = 1, nodes: int = MIN_NODES) -> ZakResult:
    """Closed-form dimer Zak phase ``(-1)^{j+1} (p + w)`` for band ``j`` (1 = acoustic).

    ``w`` is the winding of ``gamma`` around the origin: ``pi`` if
    ``s_1 > s_2`` and ``0`` if ``s_1 < s_2``.  When ``s_1 = s_2`` the path runs
    through the origin; ``p`` is then a principal value and ``w = +-pi/2`` is
    the half residue, its sign set by the branch of the root there.  ``L``
    only rescales the parameter and does not change the result.
    """
    if j not in (1, 2):
        raise ValidationError("the dimer has bands 1 and 2")
    if L is not None and L <= 0:
        raise ValidationError("period must be positive")
    p, sigma = _path_integral(s_1, s_2, v_1, v_2, nodes)
    if s_1 > s_2:
        w = np.pi
    elif s_1 < s_2:
        w = 0.0
    else:
        w = sigma * np.pi / 2
    value = (-1) ** (j + 1) * (p + w)
    # midpoint rule on a smooth periodic integrand: error far below the reported digits
    return ZakResult(j, wrap_phase(value), "path-integral", nodes, 0.0, p)


def randomise_gauge(band: BandStructure, rng) -> BandStructure:
    """Multiply every eigenvector pair by an independent random unit phase."""
    phases = np.exp(2j * np.pi * rng.random((band.alphas.size, 1, band.N)))
    return replace(band, right=band.right * phases, left=band.left * phases)
