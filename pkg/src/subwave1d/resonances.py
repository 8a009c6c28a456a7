"""Exact subwavelength resonances from the 2N x 2N nonlinear eigenvalue problem.

Inside resonator ``i`` the field is ``a_i e^{i k_i x} + b_i e^{-i k_i x}``.  For
root finding we use the equivalent regular basis

    u(x) = p_i cos(k_i (x - c_i)) + q_i sin(k_i (x - c_i)) / k_i,

centred at the resonator midpoint ``c_i``.  It spans the same space for
``k_i != 0`` but stays well conditioned as ``omega -> 0``, where the exponential
basis collapses and its determinant picks up a spurious zero of order
``omega^N``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .capacitance import (
    capacitance_finite,
    capacitance_periodic,
    eigen_decomposition,
    generalised,
)
from .dtn import dtn_matrix, finite_dtn_matrix
from .errors import ConsistencyError, ConvergenceError, SingularDtnError, ValidationError
from .geometry import FiniteChain, Materials, UnitCell

__all__ = [
    "NonlinearSystem",
    "ResonanceResult",
    "assemble_A",
    "assemble_regular",
    "muller",
    "find_resonances",
    "capacitance_seeds",
    "reconstruct_mode",
]

MAX_ITER = 100
REL_TOL = 1e-12
ABS_TOL = 1e-14
DEDUPE_TOL = 1e-8
ROTATION = 0.05


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    """Either a periodic cell at quasi-momentum ``alpha`` or a finite chain with
    outgoing radiation conditions (``alpha`` is ``None``)."""

    lengths: np.ndarray
    x_left: np.ndarray
    speeds: np.ndarray
    delta: float
    background_speed: float
    alpha: float | None
    cell: UnitCell | None = None
    chain: FiniteChain | None = None

    @classmethod
    def periodic(cls, cell: UnitCell, materials: Materials, alpha: float) -> "NonlinearSystem":
        if materials.N != cell.N:
            raise ValidationError(f"{cell.N} resonators but {materials.N} materials")
        return cls(cell.lengths, cell.x_left, materials.speeds, materials.delta,
                   materials.v, float(alpha), cell=cell)

    @classmethod
    def finite(cls, chain: FiniteChain) -> "NonlinearSystem":
        return cls(chain.lengths, chain.x_left, chain.speeds, chain.delta,
                   chain.background_speed, None, chain=chain)

    @property
    def size(self) -> int:
        return self.lengths.size

    @property
    def is_periodic(self) -> bool:
        return self.cell is not None

    @property
    def x_right(self) -> np.ndarray:
        return self.x_left + self.lengths

    @property
    def centres(self) -> np.ndarray:
        return self.x_left + 0.5 * self.lengths

    def dtn(self, omega: complex) -> np.ndarray:
        k = omega / self.background_speed
        if self.is_periodic:
            return dtn_matrix(self.cell, k, self.alpha)
        return finite_dtn_matrix(self.chain, k)

    def regular_blocks(self, omega: complex):
        """Boundary values ``E`` and outward interior derivatives ``Dn`` per resonator.

        Each is ``(n, 2, 2)``: rows (left end, right end), columns ``(p, q)``.
        """
        k = omega / self.speeds
        h = 0.5 * self.lengths
        cs = np.cos(k * h)
        sk = h * np.sinc(k * h / np.pi)  # sin(kh)/k, exact at k = 0
        ks = k * k * sk  # k sin(kh)
        E = np.empty((self.size, 2, 2), dtype=complex)
        Dn = np.empty((self.size, 2, 2), dtype=complex)
        E[:, 0, 0], E[:, 0, 1], E[:, 1, 0], E[:, 1, 1] = cs, -sk, cs, sk
        Dn[:, 0, 0], Dn[:, 0, 1], Dn[:, 1, 0], Dn[:, 1, 1] = -ks, -cs, -ks, cs
        return E, Dn

    def regular_to_exponential(self, omega: complex, pq: np.ndarray) -> np.ndarray:
        """Map ``(p_i, q_i)`` to ``(a_i, b_i)``; ``nan`` where ``k_i = 0`` and ``q_i != 0``."""
        p, q = pq[0::2], pq[1::2]
        k = omega / self.speeds
        c = self.centres
        ab = np.empty_like(pq)
        with np.errstate(divide="ignore", invalid="ignore"):
            half_q = np.where(k != 0, q / (2j * k), np.where(q == 0, 0.0, np.nan))
        ab[0::2] = np.exp(-1j * k * c) * (0.5 * p + half_q)
        ab[1::2] = np.exp(1j * k * c) * (0.5 * p - half_q)
        return ab


def _blockdiag(blocks: np.ndarray) -> np.ndarray:
    n = blocks.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[2 * np.arange(n) + i, 2 * np.arange(n) + j] = blocks[:, i, j]
    return out


def assemble_A(sys: NonlinearSystem, omega: complex) -> np.ndarray:
    """Nonlinear matrix in the exponential basis ``(a_1, b_1, ..., a_N, b_N)``."""
    k = omega / sys.speeds
    ep_l, em_l = np.exp(1j * k * sys.x_left), np.exp(-1j * k * sys.x_left)
    ep_r, em_r = np.exp(1j * k * sys.x_right), np.exp(-1j * k * sys.x_right)
    D = np.empty((sys.size, 2, 2), dtype=complex)
    D[:, 0, 0], D[:, 0, 1] = -ep_l, em_l
    D[:, 1, 0], D[:, 1, 1] = ep_r, -em_r
    D *= (1j * k)[:, None, None]
    E = np.empty((sys.size, 2, 2), dtype=complex)
    E[:, 0, 0], E[:, 0, 1], E[:, 1, 0], E[:, 1, 1] = ep_l, em_l, ep_r, em_r
    return _blockdiag(D) - sys.delta * sys.dtn(omega) @ _blockdiag(E)


def assemble_regular(sys: NonlinearSystem, omega: complex) -> np.ndarray:
    """Nonlinear matrix in the regular basis ``(p_1, q_1, ..., p_N, q_N)``."""
    E, Dn = sys.regular_blocks(omega)
    return _blockdiag(Dn) - sys.delta * sys.dtn(omega) @ _blockdiag(E)


@dataclass(frozen=True, eq=False)
class ResonanceResult:
    omega: complex
    residual: float  # smallest singular value of the regular-basis matrix
    relative_residual: float  # residual / spectral norm
    coefficients: np.ndarray  # (a_1, b_1, ..., a_N, b_N)
    regular_coefficients: np.ndarray  # (p_1, q_1, ..., p_N, q_N)
    iterations: int
    seed: complex
    converged: bool = True
    message: str = ""


def _slogdet(sys: NonlinearSystem, omega: complex):
    sign, logabs = np.linalg.slogdet(assemble_regular(sys, omega))
    return complex(sign), float(logabs)


def muller(fun, x0: complex, x1: complex, x2: complex, rtol=REL_TOL, atol=ABS_TOL,
           maxiter=MAX_ITER):
    """Muller iteration on ``fun(x) -> (phase, log|value|)``.

    Values are rescaled by a common factor each step, which leaves the
    interpolating parabola's roots unchanged and avoids overflow.
    Returns ``(root, iterations)``; raises :class:`ConvergenceError`.
    """
    xs = [complex(x0), complex(x1), complex(x2)]
    vals = [fun(x) for x in xs]
    for it in range(1, maxiter + 1):
        for x, (_, lg) in zip(xs, vals):
            if lg == -np.inf:
                return x, it
        m = max(lg for _, lg in vals)
        f0, f1, f2 = (s * np.exp(lg - m) for s, lg in vals)
        x0, x1, x2 = xs
        h1, h2 = x1 - x0, x2 - x1
        if h1 == 0 or h2 == 0 or h1 + h2 == 0:
            raise ConvergenceError("Muller iteration collapsed onto repeated points")
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = np.sqrt(b * b - 4 * a * f2)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        dx = -2 * f2 / den if den != 0 else h2
        x3 = x2 + dx
        for _ in range(30):
            try:
                v3 = fun(x3)
                break
            except SingularDtnError:
                dx *= 0.5
                x3 = x2 + dx
        else:
            raise ConvergenceError("Muller step keeps landing on a DtN singularity")
        xs = [x1, x2, x3]
        vals = [vals[1], vals[2], v3]
        if abs(dx) < rtol * abs(x3) + atol:
            return x3, it
    raise ConvergenceError(f"Muller iteration did not converge in {maxiter} steps")


def capacitance_seeds(sys: NonlinearSystem) -> np.ndarray:
    """Leading-order frequencies ``sqrt(delta * lambda)`` of the matching capacitance problem."""
    if sys.is_periodic:
        cap = capacitance_periodic(sys.cell, sys.alpha)
    else:
        cap = capacitance_finite(sys.chain)
    lam, _, _ = eigen_decomposition(generalised(cap, sys.speeds, sys.lengths), cap)
    return np.sqrt(sys.delta * lam)


def _normalise_branch(sys: NonlinearSystem, omega: complex):
    """Map a root to the ``Re >= 0`` branch, or return ``None`` if no symmetry applies."""
    if omega.real >= -(1e-10 * abs(omega) + ABS_TOL):
        return omega
    if sys.is_periodic:
        return -omega  # the periodic problem depends on omega^2 only
    if np.all(sys.speeds.imag == 0):
        return -np.conj(omega)
    return None


def _deflation_poles(sys: NonlinearSystem, seed: complex, caps: np.ndarray) -> np.ndarray:
    """Approximate roots other than the one targeted by ``seed``.

    Dividing the determinant by ``prod (x - pole)`` removes the pull of the
    other resonances, which otherwise dominates for long chains.  For
    periodic systems the poles live in the ``omega^2`` variable.
    """
    if caps.size == 0:
        return caps
    j = int(np.argmin(np.abs(caps - seed)))
    if sys.is_periodic:
        poles, target, scale = np.delete(caps, j) ** 2, seed * seed, sys.delta
    else:
        poles, target, scale = np.concatenate((np.delete(caps, j), -caps)), seed, np.sqrt(sys.delta)
    guard = 1e-6 * max(abs(target), scale, 1e-300)
    return poles[np.abs(poles - target) > guard]


def _solve_one(sys: NonlinearSystem, seed: complex, caps: np.ndarray) -> ResonanceResult:
    seed = complex(seed)
    poles = _deflation_poles(sys, seed, caps)
    # the periodic problem depends on omega^2 only; iterating in z = omega^2
    # turns the double root at omega = 0 into a simple one
    to_omega = np.sqrt if sys.is_periodic else (lambda x: x)
    x0 = seed * seed if sys.is_periodic else seed
    floor = 1e-3 * (sys.delta if sys.is_periodic else np.sqrt(sys.delta))
    h = 1e-2 * abs(x0) if x0 != 0 else floor

    def fun(x):
        sign, logabs = _slogdet(sys, to_omega(x))
        d = x - poles
        if np.any(d == 0):
            raise SingularDtnError(0, 0, x)  # treated like a singular point: step is shortened
        return sign * np.prod(np.abs(d) / d), logabs - float(np.sum(np.log(np.abs(d))))

    try:
        root, its = muller(fun, x0 - h, x0 + 1j * h, x0)
        omega = complex(to_omega(root))
    except (ConvergenceError, SingularDtnError) as exc:
        empty = np.full(2 * sys.size, np.nan, dtype=complex)
        return ResonanceResult(complex(np.nan, np.nan), np.inf, np.inf, empty, empty,
                               MAX_ITER, seed, False, str(exc))
    branch = _normalise_branch(sys, omega)
    if branch is None:
        empty = np.full(2 * sys.size, np.nan, dtype=complex)
        return ResonanceResult(omega, np.inf, np.inf, empty, empty, its, seed, False,
                               "root on the Re(omega) < 0 branch")
    omega = branch
    A = assemble_regular(sys, omega)
    _, sv, vh = np.linalg.svd(A)
    pq = vh[-1].conj()
    pq = pq / pq[np.argmax(np.abs(pq))]
    return ResonanceResult(
        omega, float(sv[-1]), float(sv[-1] / sv[0]),
        sys.regular_to_exponential(omega, pq), pq, its, seed,
    )


def find_resonances(sys: NonlinearSystem, seeds=None, perturbed: bool = True,
                    workers: int = 1) -> list[ResonanceResult]:
    """Roots of the nonlinear problem started from ``seeds``.

    Seeds default to the capacitance frequencies; with ``perturbed`` each seed
    is also tried rotated by ``exp(+-0.05i)``.  Each search runs Muller's
    method on the log-scaled LU determinant of the regular-basis matrix (in
    ``omega^2`` for periodic systems),
    deflated by the capacitance estimates of all other roots.  Converged roots are
    deduplicated at 1e-8 relative distance and sorted by ``|omega|``; failed
    seeds are returned after them with ``converged=False``.
    """
    caps = capacitance_seeds(sys)
    base = caps if seeds is None else np.atleast_1d(np.asarray(seeds, complex))
    trials = list(base)
    if perturbed:
        trials += [s * np.exp(1j * ROTATION) for s in base]
        trials += [s * np.exp(-1j * ROTATION) for s in base]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _solve_one(sys, s, caps), trials))
    else:
        results = [_solve_one(sys, s, caps) for s in trials]
    roots: list[ResonanceResult] = []
    failed: list[ResonanceResult] = []
    for res in results:
        if not res.converged:
            failed.append(res)
            continue
        scale = max(abs(res.omega), 1e-300)
        if any(abs(res.omega - r.omega) <= DEDUPE_TOL * max(scale, abs(r.omega)) + ABS_TOL
               for r in roots):
            continue
        roots.append(res)
    roots.sort(key=lambda r: (round(abs(r.omega), 14), r.omega.real))
    # a failed primary seed is only reported if none of its rotations succeeded
    n = len(base)
    reported = []
    for i in range(n):
        group = [results[i + j * n] for j in range(len(trials) // n)]
        if not any(g.converged for g in group):
            reported.append(results[i])
    return roots + reported


def _interior(sys: NonlinearSystem, omega: complex, pq: np.ndarray, i: int, x):
    k = omega / sys.speeds[i]
    t = x - sys.centres[i]
    p, q = pq[2 * i], pq[2 * i + 1]
    val = p * np.cos(k * t) + q * t * np.sinc(k * t / np.pi)
    der = -p * k * k * t * np.sinc(k * t / np.pi) + q * np.cos(k * t)
    return val, der


def _gap(k: complex, x_r: float, x_n: float, f_r, f_n, x):
    """Helmholtz solution on ``(x_r, x_n)`` with end values ``f_r, f_n``; exact at k = 0."""
    s = x_n - x_r
    den = s * np.sinc(k * s / np.pi)
    t1, t2 = x_n - x, x - x_r
    val = (f_r * t1 * np.sinc(k * t1 / np.pi) + f_n * t2 * np.sinc(k * t2 / np.pi)) / den
    der = (-f_r * np.cos(k * t1) + f_n * np.cos(k * t2)) / den
    return val, der


def reconstruct_mode(result: ResonanceResult, sys: NonlinearSystem, x_grid=None,
                     continuity_tol: float = 1e-8, flux_tol: float = 1e-6):
    """Evaluate a resonant mode on ``x_grid`` after checking the interface conditions.

    Raises :class:`ConsistencyError` if continuity or the flux condition
    ``delta * u'_outside = u'_inside`` fails at any endpoint.  Returns the
    sampled field (or ``None`` if ``x_grid`` is ``None``).
    """
    if not result.converged:
        raise ValidationError("cannot reconstruct a non-converged resonance")
    omega, pq = result.omega, result.regular_coefficients
    k = omega / sys.background_speed
    n = sys.size
    xl, xr = sys.x_left, sys.x_right
    f = np.empty(2 * n, dtype=complex)
    d_in = np.empty(2 * n, dtype=complex)
    for i in range(n):
        f[2 * i], d_in[2 * i] = _interior(sys, omega, pq, i, xl[i])
        f[2 * i + 1], d_in[2 * i + 1] = _interior(sys, omega, pq, i, xr[i])

    if sys.is_periodic:
        L = sys.cell.L
        phase = np.exp(1j * sys.alpha * L)
        nxt_x = np.append(xl[1:], L)
        nxt_f = np.append(f[2::2], phase * f[0])
    else:
        nxt_x, nxt_f = xl[1:], f[2::2]

    # outside values and derivatives at every endpoint
    f_out = np.empty(2 * n, dtype=complex)
    d_out = np.empty(2 * n, dtype=complex)
    for g in range(nxt_x.size):
        v0, d0 = _gap(k, xr[g], nxt_x[g], f[2 * g + 1], nxt_f[g], xr[g])
        v1, d1 = _gap(k, xr[g], nxt_x[g], f[2 * g + 1], nxt_f[g], nxt_x[g])
        f_out[2 * g + 1], d_out[2 * g + 1] = v0, d0
        if g + 1 < n:
            f_out[2 * g + 2], d_out[2 * g + 2] = v1, d1
        else:
            f_out[0], d_out[0] = v1 / phase, d1 / phase
    if not sys.is_periodic:
        f_out[0], d_out[0] = f[0], -1j * k * f[0]
        f_out[-1], d_out[-1] = f[-1], 1j * k * f[-1]

    scale = np.max(np.abs(f))
    cont = np.max(np.abs(f_out - f)) / scale
    if cont > continuity_tol:
        raise ConsistencyError(f"mode discontinuous at an interface: {cont:.3e}")
    # derivatives of a subwavelength mode are O(delta * |u| / gap); that sets
    # the floor so a flat mode is not judged on round-off
    gap_min = np.min(nxt_x - xr[: nxt_x.size]) if nxt_x.size else 1.0
    flux_scale = max(np.max(np.abs(d_in)), sys.delta * np.max(np.abs(d_out)),
                     sys.delta * scale / gap_min)
    flux = np.max(np.abs(sys.delta * d_out - d_in)) / flux_scale
    if flux > flux_tol:
        raise ConsistencyError(f"flux condition violated: {flux:.3e}")

    if x_grid is None:
        return None
    x = np.asarray(x_grid, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    if sys.is_periodic:
        m = np.floor(x / L)
        y = x - m * L
        factor = np.exp(1j * sys.alpha * m * L)
    else:
        y, factor = x, np.ones(x.shape)
    for idx in np.ndindex(x.shape):
        yy = y[idx]
        i = int(np.searchsorted(xl, yy, side="right")) - 1
        if i < 0:
            val = f[0] * np.exp(-1j * k * (yy - xl[0]))
        elif yy <= xr[i]:
            val = _interior(sys, omega, pq, i, yy)[0]
        elif i < nxt_x.size:
            val = _gap(k, xr[i], nxt_x[i], f[2 * i + 1], nxt_f[i], yy)[0]
        else:
            val = f[-1] * np.exp(1j * k * (yy - xr[-1]))
        out[idx] = val * factor[idx]
    return out
