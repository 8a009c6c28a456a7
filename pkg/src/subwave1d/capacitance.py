"""Capacitance matrices, their generalised form, and asymptotic band structures.

At leading order in the contrast ``delta`` the subwavelength resonances are
``omega = sqrt(delta * lambda)`` where ``lambda`` runs over the eigenvalues of
the generalised capacitance matrix ``diag(v_i^2 / ell_i) @ C``.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .geometry import FiniteChain, Materials, UnitCell, complex_pair

__all__ = [
    "CapacitanceMatrix",
    "GeneralisedCapacitance",
    "BandStructure",
    "capacitance_periodic",
    "capacitance_finite",
    "generalised",
    "eigen_decomposition",
    "band_structure",
    "approximate_mode",
    "approximate_mode_finite",
    "match_bands",
]

MATCH_WARN = 0.5


@dataclass(frozen=True, eq=False)
class CapacitanceMatrix:
    entries: np.ndarray
    alpha: float | None
    flavor: str  # "periodic" | "finite"

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True, eq=False)
class GeneralisedCapacitance:
    entries: np.ndarray
    scaling: np.ndarray  # v_i^2 / ell_i
    alpha: float | None
    hermitian: bool

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def capacitance_periodic(cell: UnitCell, alpha: float) -> CapacitanceMatrix:
    """Quasiperiodic capacitance matrix of one unit cell."""
    s = cell.spacings
    N = cell.N
    inv = 1.0 / s
    C = np.zeros((N, N), dtype=complex)
    idx = np.arange(N)
    C[idx, idx] = inv + np.roll(inv, 1)
    if N > 1:
        C[idx[:-1], idx[1:]] -= inv[:-1]
        C[idx[1:], idx[:-1]] -= inv[:-1]
    phase = np.exp(1j * alpha * cell.L)
    C[0, N - 1] -= inv[-1] / phase
    C[N - 1, 0] -= inv[-1] * phase
    return CapacitanceMatrix(C, float(alpha), "periodic")


def capacitance_finite(chain: FiniteChain) -> CapacitanceMatrix:
    """Capacitance matrix of a finite chain with constant extension outside."""
    M = chain.M
    C = np.zeros((M, M))
    if M > 1:
        inv = 1.0 / chain.gaps
        idx = np.arange(M - 1)
        C[idx, idx] += inv
        C[idx + 1, idx + 1] += inv
        C[idx, idx + 1] -= inv
        C[idx + 1, idx] -= inv
    return CapacitanceMatrix(C, None, "finite")


def _speeds_of(materials) -> np.ndarray:
    if isinstance(materials, Materials):
        return materials.speeds
    return np.atleast_1d(np.asarray(materials, dtype=complex))


def generalised(cap: CapacitanceMatrix, materials, lengths) -> GeneralisedCapacitance:
    """Row scaling ``v_i^2 / ell_i`` of the capacitance matrix.

    ``materials`` may be a :class:`Materials` or a plain array of speeds.
    """
    v = _speeds_of(materials)
    ell = np.atleast_1d(np.asarray(lengths, dtype=float))
    if v.size != cap.N or ell.size != cap.N:
        raise ValidationError(
            f"dimension mismatch: matrix {cap.N}, speeds {v.size}, lengths {ell.size}"
        )
    scale = v**2 / ell
    hermitian = bool(np.all(v.imag == 0))
    return GeneralisedCapacitance(scale[:, None] * cap.entries, scale, cap.alpha, hermitian)


def eigen_decomposition(gen: GeneralisedCapacitance, cap: CapacitanceMatrix | None = None):
    """Eigenvalues with unit-norm right vectors ``U`` and dual left vectors ``V``.

    ``V^H U = I``.  For real speeds the symmetrised problem ``W C W`` with
    ``W = diag(sqrt(v_i^2/ell_i))`` is solved with a Hermitian solver, which
    keeps the eigenvalues exactly real.
    """
    if gen.hermitian:
        w = np.sqrt(gen.scaling.real)
        C = gen.entries / gen.scaling[:, None] if cap is None else cap.entries
        S = w[:, None] * C * w[None, :]
        S = 0.5 * (S + S.conj().T)
        lam, Q = np.linalg.eigh(S)
        U = w[:, None] * Q
        norms = np.linalg.norm(U, axis=0)
        U = U / norms
        V = (Q / w[:, None]) * norms
        return lam.astype(complex), U, V
    lam, U = np.linalg.eig(gen.entries)
    U = U / np.linalg.norm(U, axis=0)
    V = np.linalg.inv(U).conj().T
    return lam, U, V


def _greedy(O: np.ndarray) -> np.ndarray:
    N = O.shape[0]
    perm = np.full(N, -1)
    work = O.copy()
    for _ in range(N):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[i] = j
        work[i, :] = -1.0
        work[:, j] = -1.0
    return perm


def match_bands(prev_U: np.ndarray, U: np.ndarray) -> tuple[np.ndarray, float]:
    """Permutation of the columns of ``U`` that best continues ``prev_U``.

    Returns ``(perm, min_overlap)``; greedy for ``N <= 4``, Hungarian otherwise.
    """
    O = np.abs(prev_U.conj().T @ U)
    if O.shape[0] <= 4:
        perm = _greedy(O)
    else:
        rows, cols = linear_sum_assignment(-O)
        perm = cols[np.argsort(rows)]
    return perm, float(np.min(O[np.arange(O.shape[0]), perm]))


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Sampled bands on an ascending quasi-momentum grid.

    Arrays are indexed ``[sample, band]`` (vectors ``[sample, component, band]``).
    Band 0 is the one with the smallest ``|lambda|`` at the sample closest to
    ``alpha = 0``; other samples follow by eigenvector continuity.
    """

    alphas: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    delta: float
    L: float
    hermitian: bool
    metric: np.ndarray  # weights ell_i / |v_i|^2 of the natural inner product
    min_overlap: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.eigenvalues.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.delta * self.eigenvalues)

    @property
    def ambiguous_samples(self) -> np.ndarray:
        """Sample indices where band matching had overlap below 0.5."""
        return np.flatnonzero(self.min_overlap < MATCH_WARN)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["alpha", "band", "re_lambda", "im_lambda", "re_omega", "im_omega"])
        om = self.frequencies
        for k, a in enumerate(self.alphas):
            for j in range(self.N):
                lam = self.eigenvalues[k, j]
                writer.writerow([
                    repr(float(a)), j + 1, repr(float(lam.real)), repr(float(lam.imag)),
                    repr(float(om[k, j].real)), repr(float(om[k, j].imag)),
                ])
        return buf.getvalue()

    def vectors_json(self) -> str:
        data = {
            "alpha": [float(a) for a in self.alphas],
            "right": [[[complex_pair(z) for z in col] for col in U.T] for U in self.right],
            "left": [[[complex_pair(z) for z in col] for col in V.T] for V in self.left],
        }
        return json.dumps(data)


def band_structure(
    cell: UnitCell,
    materials,
    delta: float | None = None,
    alpha_grid=None,
    workers: int = 1,
) -> BandStructure:
    """Leading-order band functions of a periodic chain.

    ``materials`` is a :class:`Materials` or an array of speeds (then ``delta``
    is required).  ``alpha_grid`` defaults to 256 samples of the Brillouin zone.
    """
    v = _speeds_of(materials)
    if delta is None:
        if not isinstance(materials, Materials):
            raise ValidationError("delta is required when speeds are given directly")
        delta = materials.delta
    if not delta > 0:
        raise ValidationError(f"delta must be positive, got {delta!r}")
    alphas = cell.alpha_grid(256) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    if alphas.ndim != 1 or alphas.size == 0:
        raise ValidationError("alpha grid must be a non-empty 1D array")
    if np.any(np.diff(alphas) <= 0):
        raise ValidationError("alpha grid must be strictly increasing")
    half = np.pi / cell.L
    if alphas[0] <= -half * (1 + 1e-12) or alphas[-1] > half * (1 + 1e-12):
        raise ValidationError("alpha grid must lie in (-pi/L, pi/L]")

    def one(alpha):
        cap = capacitance_periodic(cell, alpha)
        return eigen_decomposition(generalised(cap, v, cell.lengths), cap)

    if workers > 1 and alphas.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, alphas))
    else:
        parts = [one(a) for a in alphas]

    K, N = alphas.size, cell.N
    lam = np.empty((K, N), dtype=complex)
    U = np.empty((K, N, N), dtype=complex)
    V = np.empty((K, N, N), dtype=complex)
    overlap = np.ones(K)
    k0 = int(np.argmin(np.abs(alphas)))
    l0, U0, V0 = parts[k0]
    order = np.lexsort((l0.real, np.round(np.abs(l0), 12)))
    lam[k0], U[k0], V[k0] = l0[order], U0[:, order], V0[:, order]
    sweep = [(k, k - 1) for k in range(k0 + 1, K)] + [(k, k + 1) for k in range(k0 - 1, -1, -1)]
    for k, ref in sweep:
        lk, Uk, Vk = parts[k]
        perm, ov = match_bands(U[ref], Uk)
        lam[k], U[k], V[k] = lk[perm], Uk[:, perm], Vk[:, perm]
        overlap[k] = ov

    hermitian = bool(np.all(v.imag == 0))
    if hermitian:
        lam = lam.real.astype(complex)
    metric = cell.lengths / np.abs(v) ** 2
    return BandStructure(alphas, lam, U, V, float(delta), cell.L, hermitian, metric, overlap)


def approximate_mode(cell: UnitCell, a, alpha: float, x, window=None) -> np.ndarray:
    """Leading-order Bloch mode: ``a_j`` on resonator ``j``, linear across gaps,
    extended by ``u(x + mL) = e^{i alpha m L} u(x)``."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    if a.size != cell.N:
        raise ValidationError(f"eigenvector has {a.size} entries, cell has {cell.N} resonators")
    x = np.asarray(x, dtype=float)
    if window is not None and (np.any(x < window[0]) or np.any(x > window[1])):
        raise ValidationError(f"sample points outside window {tuple(window)}")
    L = cell.L
    m = np.floor(x / L)
    y = x - m * L
    # one period of nodes: (x_j^L, a_j), (x_j^R, a_j), then x = L carries e^{i alpha L} a_1
    nodes = np.append(cell.abscissae, L)
    vals = np.append(np.repeat(a, 2), np.exp(1j * alpha * L) * a[0])
    u = np.interp(y, nodes, vals.real) + 1j * np.interp(y, nodes, vals.imag)
    return u * np.exp(1j * alpha * m * L)


def approximate_mode_finite(chain: FiniteChain, a, x) -> np.ndarray:
    """Leading-order mode of a finite chain; constant beyond both ends."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    if a.size != chain.M:
        raise ValidationError(f"eigenvector has {a.size} entries, chain has {chain.M} resonators")
    nodes = chain.abscissae
    vals = np.repeat(a, 2)
    x = np.asarray(x, dtype=float)
    return np.interp(x, nodes, vals.real) + 1j * np.interp(x, nodes, vals.imag)
