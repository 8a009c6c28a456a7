"""Dirichlet-to-Neumann map of the exterior Helmholtz problem.

Boundary data are ordered ``(1L, 1R, 2L, 2R, ..., NL, NR)``; the map returns
outward normal derivatives, i.e. ``-w'(x_i^L)`` and ``+w'(x_i^R)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SingularDtnError, ValidationError
from .geometry import FiniteChain, UnitCell

__all__ = [
    "SERIES_THRESHOLD",
    "DtnMatrix",
    "ExteriorSolution",
    "gap_block",
    "dtn_matrix",
    "finite_dtn_matrix",
    "assemble_dtn",
    "dtn_series_terms",
    "exterior_coefficients",
    "check_admissible",
]

# Below this |k| the two-term series replaces the cot/csc quotients.  The
# truncation error there is O(k^4 s^3) < 1e-30 for unit-scale gaps.
SERIES_THRESHOLD = 1e-8
_SINGULAR_RTOL = 1e-12


def check_admissible(k: complex, spacings) -> None:
    """Raise :class:`SingularDtnError` if ``k = n*pi/s_i`` for some ``n != 0``."""
    if abs(k) < SERIES_THRESHOLD:
        return
    for i, s in enumerate(np.atleast_1d(spacings)):
        ks = k * s
        if abs(np.sin(ks)) <= _SINGULAR_RTOL * max(1.0, abs(ks)):
            raise SingularDtnError(i + 1, int(np.rint((ks / np.pi).real)), k)


def gap_block(k: complex, s):
    """Diagonal and off-diagonal entries of ``A^k(s)``, vectorised over ``s``.

    Returns ``(-k cot(ks), k / sin(ks))``; the small-``k`` branch uses the
    series ``(-1/s + k^2 s/3, 1/s + k^2 s/6)``.
    """
    s = np.asarray(s, dtype=float)
    if abs(k) < SERIES_THRESHOLD:
        k2 = k * k
        return -1.0 / s + k2 * s / 3.0, 1.0 / s + k2 * s / 6.0
    check_admissible(k, s)
    sin = np.sin(k * s)
    return -k * np.cos(k * s) / sin, k / sin


def _fill(T: np.ndarray, diag, off, N: int) -> None:
    # interior gaps 1..N-1 couple (iR, (i+1)L)
    if N > 1:
        r = np.arange(1, 2 * N - 1, 2)
        T[r, r] += diag
        T[r + 1, r + 1] += diag
        T[r, r + 1] += off
        T[r + 1, r] += off


def dtn_matrix(cell: UnitCell, k: complex, alpha: float) -> np.ndarray:
    """Raw ``2N x 2N`` quasiperiodic DtN matrix ``T^{k, alpha}``."""
    N = cell.N
    diag, off = gap_block(k, cell.spacings)
    T = np.zeros((2 * N, 2 * N), dtype=complex)
    _fill(T, diag[:-1], off[:-1], N)
    phase = np.exp(1j * alpha * cell.L)
    T[0, 0] += diag[-1]
    T[-1, -1] += diag[-1]
    T[0, -1] += off[-1] / phase
    T[-1, 0] += off[-1] * phase
    return T


def finite_dtn_matrix(chain: FiniteChain, k: complex) -> np.ndarray:
    """DtN matrix of a finite chain with outgoing waves at both ends."""
    M = chain.M
    T = np.zeros((2 * M, 2 * M), dtype=complex)
    if M > 1:
        diag, off = gap_block(k, chain.gaps)
        _fill(T, diag, off, M)
    T[0, 0] += 1j * k
    T[-1, -1] += 1j * k
    return T


@dataclass(frozen=True, eq=False)
class DtnMatrix:
    k: complex
    alpha: float
    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def to_json(self) -> str:
        """Debug dump: 2D array of ``[re, im]`` pairs."""
        rows = [[[z.real, z.imag] for z in row] for row in self.entries]
        return json.dumps({"k": [complex(self.k).real, complex(self.k).imag],
                           "alpha": self.alpha, "entries": rows})


def assemble_dtn(cell: UnitCell, k: complex, alpha: float) -> DtnMatrix:
    return DtnMatrix(complex(k), float(alpha), dtn_matrix(cell, k, alpha))


def dtn_series_terms(cell: UnitCell, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """First two matrices ``(T_0, T_2)`` of ``T^{k,alpha} = sum_n k^{2n} T_{2n}``."""
    N = cell.N
    s = cell.spacings
    phase = np.exp(1j * alpha * cell.L)
    T0 = np.zeros((2 * N, 2 * N), dtype=complex)
    T2 = np.zeros((2 * N, 2 * N), dtype=complex)
    _fill(T0, -1.0 / s[:-1], 1.0 / s[:-1], N)
    _fill(T2, s[:-1] / 3.0, s[:-1] / 6.0, N)
    sN = s[-1]
    T0[0, 0] += -1.0 / sN
    T0[-1, -1] += -1.0 / sN
    T0[0, -1] += 1.0 / sN / phase
    T0[-1, 0] += 1.0 / sN * phase
    T2[0, 0] += sN / 3.0
    T2[-1, -1] += sN / 3.0
    T2[0, -1] += sN / 6.0 / phase
    T2[-1, 0] += sN / 6.0 * phase
    return T0, T2


@dataclass(frozen=True, eq=False)
class ExteriorSolution:
    """Gap-wise coefficients of ``w(x) = a_i e^{ikx} + b_i e^{-ikx}``.

    Gap ``i`` (0-based) spans ``(x_i^R, x_{i+1}^L)`` with ``x_N^L = L``.
    """

    cell: UnitCell
    k: complex
    alpha: float
    a: np.ndarray
    b: np.ndarray

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        L = self.cell.L
        m = np.floor(x / L)
        y = x - m * L
        xr = self.cell.x_right
        xl_next = np.append(self.cell.x_left[1:], L)
        gap = np.searchsorted(xr, y, side="right") - 1
        inside = (gap >= 0) & (y <= xl_next[np.clip(gap, 0, None)])
        # y in [0, x_1^L) cannot happen since x_1^L = 0
        return m, y, gap, inside

    def evaluate(self, x) -> np.ndarray:
        """``w(x)``; ``nan`` for points inside resonators."""
        m, y, gap, inside = self._locate(x)
        g = np.clip(gap, 0, None)
        k = self.k
        val = self.a[g] * np.exp(1j * k * y) + self.b[g] * np.exp(-1j * k * y)
        val = val * np.exp(1j * self.alpha * m * self.cell.L)
        return np.where(inside, val, np.nan)

    def derivative(self, x) -> np.ndarray:
        m, y, gap, inside = self._locate(x)
        g = np.clip(gap, 0, None)
        k = self.k
        val = 1j * k * (self.a[g] * np.exp(1j * k * y) - self.b[g] * np.exp(-1j * k * y))
        val = val * np.exp(1j * self.alpha * m * self.cell.L)
        return np.where(inside, val, np.nan)

    def normal_derivatives(self) -> np.ndarray:
        """Outward normal derivatives at all ``2N`` endpoints (DtN action)."""
        k = self.k
        N = self.cell.N
        xl = self.cell.x_left
        xr = self.cell.x_right
        out = np.empty(2 * N, dtype=complex)

        def dw(i, y):
            return 1j * k * (self.a[i] * np.exp(1j * k * y) - self.b[i] * np.exp(-1j * k * y))

        for i in range(N):
            out[2 * i + 1] = dw(i, xr[i])
            if i == 0:
                # left of x_1^L lies gap N shifted by -L
                out[0] = -np.exp(-1j * self.alpha * self.cell.L) * dw(N - 1, self.cell.L)
            else:
                out[2 * i] = -dw(i - 1, xl[i])
        return out


def gap_coefficients(k: complex, x_r, x_next, f_r, f_next):
    """2x2 solve for ``(a, b)`` on a gap with Dirichlet data at both ends."""
    pre = -1.0 / (2j * np.sin(k * (x_next - x_r)))
    a = pre * (np.exp(-1j * k * x_next) * f_r - np.exp(-1j * k * x_r) * f_next)
    b = pre * (-np.exp(1j * k * x_next) * f_r + np.exp(1j * k * x_r) * f_next)
    return a, b


def exterior_coefficients(cell: UnitCell, k: complex, alpha: float, f) -> ExteriorSolution:
    """Solve the quasiperiodic exterior problem for boundary data ``f`` (size 2N)."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (2 * cell.N,):
        raise ValidationError(f"boundary data must have length {2 * cell.N}, got {f.shape}")
    if k == 0:
        raise ValidationError("exterior_coefficients needs k != 0")
    check_admissible(k, cell.spacings)
    x_r = cell.x_right
    x_next = np.append(cell.x_left[1:], cell.L)
    f_r = f[1::2]
    f_next = np.append(f[2::2], np.exp(1j * alpha * cell.L) * f[0])
    a, b = gap_coefficients(k, x_r, x_next, f_r, f_next)
    return ExteriorSolution(cell, complex(k), float(alpha), a, b)
