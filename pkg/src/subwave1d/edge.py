"""Edge modes at a dimer interface: closed-form prediction, finite-array
detection, decay-rate fits and Monte-Carlo robustness studies."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .capacitance import (
    band_structure,
    capacitance_finite,
    capacitance_periodic,
    eigen_decomposition,
    generalised,
)
from .errors import ConvergenceError, ValidationError
from .geometry import FiniteChain, UnitCell
from .resonances import NonlinearSystem, ResonanceResult, find_resonances

__all__ = [
    "EdgePrediction",
    "SpectrumReport",
    "predict_edge_mode",
    "edge_identities",
    "defect_condition_matrix",
    "alpha_independent_eigenvalue",
    "finite_spectrum",
    "refine_exact",
    "decay_fit",
    "DecayFit",
    "dimer_band_gap",
    "stability_study",
    "StabilityTable",
]

WINDOW_FRACTION = 0.2
SCORE_THRESHOLD = 0.5
ISOLATION_FACTOR = 5.0
LOCALISATION_TOL = 1e-12
MAX_RESAMPLE_FRACTION = 0.5


@dataclass(frozen=True)
class EdgePrediction:
    mu: complex
    omega: complex
    b_plus: complex
    b_minus: complex
    selected_b: complex | None
    localised: bool
    D: complex
    v_1: complex
    v_2: complex
    delta: float
    s_1: float
    ell_1: float

    def to_dict(self) -> dict:
        pair = lambda z: None if z is None else [complex(z).real, complex(z).imag]  # noqa: E731
        return {
            "mu": pair(self.mu),
            "omega": pair(self.omega),
            "b_plus": pair(self.b_plus),
            "b_minus": pair(self.b_minus),
            "selected_b": pair(self.selected_b),
            "localised": self.localised,
            "D": pair(self.D),
        }


def _decay_roots(v_1: complex, v_2: complex):
    r = v_1 * v_1 / (v_2 * v_2)
    D = 9 * r * r - 14 * r + 9
    sD = np.sqrt(D)
    q = 3 * (1 - r)
    # take the root without cancellation, the other from b_+ b_- = -r
    if abs(q + sD) >= abs(q - sD):
        bp = 0.5 * (q + sD)
        bm = -r / bp
    else:
        bm = 0.5 * (q - sD)
        bp = -r / bm
    return r, D, bp, bm


def predict_edge_mode(v_1: complex, v_2: complex, s_1: float = 1.0, ell_1: float = 1.0,
                      delta: float = 1e-3, tol: float = LOCALISATION_TOL) -> EdgePrediction:
    """Closed-form interface mode of the material-defect dimer chain.

    The decay rates are the roots ``b_+-`` of ``b^2 - 3(1 - r) b - r = 0`` with
    ``r = v_1^2 / v_2^2``.  The eigenvalue is evaluated on the branch of
    ``sqrt(D)`` that belongs to the root with ``|b| < 1``, i.e.
    ``sigma = 2 b - 3 (1 - r)``:

        mu = (delta/s_1) 8 v_1^2 (-3 v_1^2 + v_2^2 sigma + 3 v_2^2)
                                / (-7 v_1^2 + 3 v_2^2 sigma + 9 v_2^2)
    """
    v_1, v_2 = complex(v_1), complex(v_2)
    if v_2 == 0 or v_1 == 0:
        raise ValidationError("speeds must be nonzero")
    if not (s_1 > 0 and ell_1 > 0 and delta > 0):
        raise ValidationError("s_1, ell_1 and delta must be positive")
    r, D, bp, bm = _decay_roots(v_1, v_2)
    # ties (|b_+| = |b_-|) fall back to b_-
    sel = bm if abs(bm) <= abs(bp) else bp
    localised = bool(min(abs(bp), abs(bm)) < 1 - tol)
    sigma = 2 * sel - 3 * (1 - r)
    a2, b2 = v_1 * v_1, v_2 * v_2
    mu = (delta / s_1) * 8 * a2 * (-3 * a2 + b2 * sigma + 3 * b2) / (-7 * a2 + 3 * b2 * sigma + 9 * b2)
    omega = np.sqrt(mu / ell_1)
    return EdgePrediction(
        complex(mu), complex(omega), complex(bp), complex(bm),
        complex(sel) if localised else None, localised, complex(D),
        v_1, v_2, float(delta), float(s_1), float(ell_1),
    )


def _identity_terms(a2, b2, sD):
    return (3 * a2 - b2 * (sD + 3),
            (9 * a2 * a2, -3 * a2 * b2 * sD, -16 * a2 * b2, 3 * b2 * b2 * sD, 9 * b2 * b2))


def edge_identities(v_1: complex, v_2: complex, digits_lost: float = 3.0):
    """``(A, B, b_+ b_-)`` with ``A = 3 v_1^2 - v_2^2 (sqrt(D) + 3)`` and
    ``B = 9 v_1^4 - 3 v_1^2 v_2^2 sqrt(D) - 16 v_1^2 v_2^2 + 3 v_2^4 sqrt(D) + 9 v_2^4``;
    the closed form rests on ``2B = A^2`` and ``b_+ b_- = -v_1^2/v_2^2``.

    The terms of ``B`` cancel when ``A`` is small.  If more than
    ``digits_lost`` digits would be lost, ``A`` and ``B`` are re-evaluated
    with mpmath at 40 significant digits and rounded back.
    """
    v_1, v_2 = complex(v_1), complex(v_2)
    r, D, bp, bm = _decay_roots(v_1, v_2)
    A, terms = _identity_terms(v_1**2, v_2**2, np.sqrt(D))
    B = sum(terms)
    if abs(B) < 10.0**-digits_lost * max(abs(t) for t in terms):
        import mpmath

        with mpmath.workdps(40):
            a2, b2 = mpmath.mpc(v_1) ** 2, mpmath.mpc(v_2) ** 2
            q = a2 / b2
            hA, hterms = _identity_terms(a2, b2, mpmath.sqrt(9 * q * q - 14 * q + 9))
            A, B = complex(hA), complex(sum(hterms))
    return A, B, bp * bm


def _equal_dimer(s: float, ell: float) -> UnitCell:
    return UnitCell([ell, ell], [s, s])


def defect_condition_matrix(v_1: complex, v_2: complex, b: complex, delta: float, alpha: float,
                            s: float = 1.0, ell: float = 1.0, tol: float = 1e-14) -> np.ndarray:
    """``B^-1 C^alpha A`` for the equal dimer, with ``A = [[1, b], [b, 1]]`` and
    ``B = (1/delta) [[v_2^-2, b v_1^-2], [b v_1^-2, v_2^-2]]``.

    An interface mode with decay rate ``b`` requires an eigenvalue of this
    matrix that does not depend on ``alpha``.
    """
    v_1, v_2, b = complex(v_1), complex(v_2), complex(b)
    p, q = v_2**-2, b * v_1**-2
    if abs(p * p - q * q) <= tol * max(abs(p) ** 2, abs(q) ** 2):
        raise ValidationError("B is singular for this decay rate (b^2 = v_1^4/v_2^4)")
    A = np.array([[1, b], [b, 1]], dtype=complex)
    B = np.array([[p, q], [q, p]], dtype=complex) / delta
    C = capacitance_periodic(_equal_dimer(s, ell), alpha).entries
    return np.linalg.solve(B, C @ A)


def alpha_independent_eigenvalue(v_1, v_2, b, delta, alphas, s=1.0, ell=1.0):
    """Eigenvalue of :func:`defect_condition_matrix` tracked across ``alphas``.

    Starts from each eigenvalue at ``alphas[0]`` and follows the nearest one.
    Returns ``(value_at_first_alpha, spread)`` for the track with the smallest
    spread ``max |lambda(alpha) - lambda(alpha_0)|``.
    """
    eigs = [np.linalg.eigvals(defect_condition_matrix(v_1, v_2, b, delta, a, s, ell)) for a in alphas]
    best = None
    for start in eigs[0]:
        track = [start]
        for e in eigs[1:]:
            track.append(e[np.argmin(np.abs(e - track[-1]))])
        spread = float(np.max(np.abs(np.array(track) - start)))
        if best is None or spread < best[1]:
            best = (complex(start), spread)
    return best


def _central_window(M: int, fraction: float) -> np.ndarray:
    j = np.arange(M)
    return np.abs(j - 0.5 * (M - 1)) <= 0.5 * fraction * M


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Leading-order resonances of a finite chain, sorted by ``(Re, Im)`` of omega."""

    chain: FiniteChain
    delta: float
    eigenvalues: np.ndarray
    omegas: np.ndarray
    vectors: np.ndarray  # columns are unit-norm right eigenvectors
    scores: np.ndarray
    isolation: np.ndarray  # distance to the nearest other resonance / median spacing
    flagged: np.ndarray  # indices of edge modes

    @property
    def M(self) -> int:
        return self.omegas.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "omega_re", "omega_im", "score", "flagged"])
        flags = set(self.flagged.tolist())
        for i, om in enumerate(self.omegas):
            w.writerow([i, repr(float(om.real)), repr(float(om.imag)), repr(float(self.scores[i])),
                        int(i in flags)])
        return buf.getvalue()

    def nearest_flagged(self, omega: complex) -> int | None:
        if self.flagged.size == 0:
            return None
        return int(self.flagged[np.argmin(np.abs(self.omegas[self.flagged] - omega))])


def finite_spectrum(chain: FiniteChain, delta: float | None = None,
                    window: float = WINDOW_FRACTION, score_threshold: float = SCORE_THRESHOLD,
                    isolation_factor: float = ISOLATION_FACTOR) -> SpectrumReport:
    """Capacitance-level spectrum of a finite chain with localisation scores.

    A mode is flagged when more than ``score_threshold`` of its weight sits in
    the central ``window`` fraction of resonators and its distance to every
    other resonance exceeds ``isolation_factor`` times the median
    nearest-neighbour spacing.
    """
    delta = chain.delta if delta is None else float(delta)
    if not delta > 0:
        raise ValidationError("delta must be positive")
    cap = capacitance_finite(chain)
    lam, U, _ = eigen_decomposition(generalised(cap, chain.speeds, chain.lengths), cap)
    if chain.hermitian:
        lam = np.where(np.abs(lam) < 1e-13 * max(np.max(np.abs(lam)), 1e-300), 0.0, lam.real)
        lam = lam.astype(complex)
    omegas = np.sqrt(delta * lam)
    order = np.lexsort((np.round(omegas.imag, 14), np.round(omegas.real, 14)))
    lam, omegas, U = lam[order], omegas[order], U[:, order]
    # deterministic phase: largest component real positive
    piv = U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])]
    U = U * (np.abs(piv) / piv)[None, :]
    W = _central_window(chain.M, window)
    weight = np.abs(U) ** 2
    scores = np.clip(weight[W].sum(axis=0) / weight.sum(axis=0), 0.0, 1.0)
    if chain.M > 1:
        dist = np.abs(omegas[:, None] - omegas[None, :])
        np.fill_diagonal(dist, np.inf)
        nn = dist.min(axis=1)
        med = np.median(nn)
        isolation = nn / med if med > 0 else np.full(chain.M, np.inf)
    else:
        isolation = np.full(1, np.inf)
    flagged = np.flatnonzero((scores > score_threshold) & (isolation > isolation_factor))
    return SpectrumReport(chain, delta, lam, omegas, U, scores, isolation, flagged)


def refine_exact(report: SpectrumReport, index: int) -> ResonanceResult:
    """Solve the full finite-chain resonance problem starting from mode ``index``."""
    chain = report.chain if report.chain.delta == report.delta else report.chain.replace(delta=report.delta)
    sys = NonlinearSystem.finite(chain)
    res = find_resonances(sys, seeds=[report.omegas[index]], perturbed=True)
    good = [r for r in res if r.converged]
    if not good:
        raise ConvergenceError(f"no exact resonance found near mode {index}")
    return min(good, key=lambda r: abs(r.omega - report.omegas[index]))


@dataclass(frozen=True)
class DecayFit:
    ratio: complex  # per-dimer amplitude ratio moving away from the interface (right side)
    ratio_left: complex
    dimers_used: int


def _fit_side(u: np.ndarray, idx: np.ndarray, floor: float):
    vals = u[idx]
    keep = np.abs(vals) > floor
    # stop at the first sample below the floor so round-off never enters the fit
    if not keep.all():
        vals = vals[: int(np.argmin(keep))]
    if vals.size < 4:
        return None, vals.size
    n = np.arange(vals.size)
    logs = np.log(np.abs(vals)) + 1j * np.unwrap(np.angle(vals))
    slope = np.polyfit(n, logs.real, 1)[0] + 1j * np.polyfit(n, logs.imag, 1)[0]
    return complex(np.exp(slope)), vals.size


def decay_fit(report: SpectrumReport, index: int, skip_dimers: int = 2,
              floor: float = 1e-10) -> DecayFit:
    """Least-squares fit of the per-dimer decay of mode ``index``.

    Samples every second resonator (one sublattice) on each side of the chain
    centre, skipping ``skip_dimers`` dimers next to the interface and
    stopping where the amplitude drops below ``floor`` times its maximum.
    """
    if index not in set(report.flagged.tolist()):
        raise ValidationError(f"mode {index} is not a flagged edge mode")
    u = report.vectors[:, index]
    M = report.M
    centre = 0.5 * (M - 1)
    right0 = int(np.ceil(centre)) + 2 * skip_dimers
    left0 = int(np.floor(centre)) - 2 * skip_dimers
    thr = floor * np.max(np.abs(u))
    right, nr = _fit_side(u, np.arange(right0, M, 2), thr)
    left, nl = _fit_side(u, np.arange(left0, -1, -2), thr)
    if right is None or left is None:
        raise ValidationError(f"fewer than 4 usable dimers for the decay fit ({min(nr, nl)})")
    return DecayFit(right, left, min(nr, nl))


def dimer_band_gap(cell: UnitCell, speeds, delta: float, grid: int = 256) -> tuple[float, float]:
    """Frequency gap ``(top of band 1, bottom of band 2)`` of a Hermitian dimer."""
    bs = band_structure(cell, speeds, delta, cell.alpha_grid(grid))
    om = bs.frequencies.real
    lo, hi = float(np.max(om[:, 0])), float(np.min(om[:, 1]))
    # the extrema sit at the zone edge, which the grid includes; also sample it exactly
    edge = band_structure(cell, speeds, delta, [np.pi / cell.L]).frequencies.real[0]
    return max(lo, float(edge[0])), min(hi, float(edge[1]))


@dataclass(frozen=True, eq=False)
class StabilityTable:
    rows: list  # (sample, sigma, mode, omega_re, omega_im, score, flagged)
    edge_omegas: np.ndarray  # tracked edge frequency per sample (nan if none flagged)
    resamples: int
    draws: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "sigma", "mode", "omega_re", "omega_im", "score", "flagged"])
        for row in self.rows:
            s, sig, m, re, im, sc, fl = row
            w.writerow([s, repr(sig), m, repr(re), repr(im), repr(sc), fl])
        return buf.getvalue()


def _perturb(base: FiniteChain, kind: str, sigma: float, rng, max_tries: int = 1000):
    if kind == "geometric":
        resamples = 0
        for _ in range(max_tries):
            gaps = base.gaps + rng.normal(0.0, sigma, base.gaps.size) if sigma > 0 else base.gaps
            if np.all(gaps > 0):
                return base.replace(gaps=gaps), resamples
            resamples += 1
        return None, resamples
    if kind == "material":
        if sigma == 0:
            return base, 0
        std = sigma / (np.sqrt(2.0) * np.abs(base.speeds))
        eps = rng.normal(0.0, 1.0, (base.M, 2)) * std[:, None]
        return base.replace(speeds=base.speeds + eps[:, 0] + 1j * eps[:, 1]), 0
    raise ValidationError(f"unknown perturbation kind {kind!r}")


def stability_study(base: FiniteChain, kind: str, sigma: float, n_samples: int, rng_seed: int,
                    track: complex | None = None, workers: int = 1) -> StabilityTable:
    """Spectra of randomly perturbed copies of ``base``.

    ``geometric`` adds ``N(0, sigma^2)`` to every gap (redrawing the whole
    sample when a gap turns non-positive); ``material`` adds
    ``eps_1 + i eps_2`` to each speed with independent components of standard
    deviation ``sigma / (sqrt(2) |v_i|)``.  Sample ``i`` draws from
    ``default_rng(rng_seed ^ i)``.  ``track`` (default: the base chain's
    flagged mode) selects which flagged mode is reported per sample.
    """
    if not sigma >= 0:
        raise ValidationError("sigma must be non-negative")
    if n_samples < 1:
        raise ValidationError("need at least one sample")
    if track is None:
        ref = finite_spectrum(base)
        if ref.flagged.size == 0:
            raise ValidationError("base chain has no flagged edge mode to track")
        track = ref.omegas[ref.flagged[np.argmax(ref.scores[ref.flagged])]]

    def one(i):
        rng = np.random.default_rng(int(rng_seed) ^ i)
        chain, resamples = _perturb(base, kind, sigma, rng)
        if chain is None:
            return i, None, resamples
        return i, finite_spectrum(chain), resamples

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_samples)))
    else:
        results = [one(i) for i in range(n_samples)]

    resamples = sum(r[2] for r in results)
    draws = n_samples + resamples
    if resamples > MAX_RESAMPLE_FRACTION * draws or any(r[1] is None for r in results):
        raise ValidationError(
            f"sigma={sigma} too large: {resamples} of {draws} spacing draws were non-positive"
        )
    rows, edge = [], np.full(n_samples, np.nan + 0j)
    for i, rep, _ in results:
        flags = set(rep.flagged.tolist())
        for m, om in enumerate(rep.omegas):
            rows.append((i, float(sigma), m, float(om.real), float(om.imag),
                         float(rep.scores[m]), int(m in flags)))
        k = rep.nearest_flagged(track)
        if k is not None:
            edge[i] = rep.omegas[k]
    return StabilityTable(rows, edge, resamples, draws)
