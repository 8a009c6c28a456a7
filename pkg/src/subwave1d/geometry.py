"""Chain geometries and material parameters.

Abscissae follow the ordering ``(x_1^L, x_1^R, x_2^L, ..., x_N^R)`` with
``x_1^L = 0``.  Every matrix in the package that acts on boundary data uses
this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import UnsupportedConfigurationError, ValidationError

__all__ = [
    "UnitCell",
    "Materials",
    "FiniteChain",
    "build_periodic",
    "build_geometric_defect",
    "build_material_defect",
    "effective_sound_speed",
    "parse_complex",
    "complex_pair",
    "cell_from_descriptor",
    "cell_to_descriptor",
]


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_positive(name: str, values: np.ndarray) -> None:
    for i, x in enumerate(values):
        if not np.isfinite(x) or x <= 0:
            raise ValidationError(f"{name}[{i}] must be positive, got {x!r}")


def parse_complex(value) -> complex:
    """Accept ``[re, im]`` pairs, numbers, or strings like ``1+1.38i``."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValidationError(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        text = value.strip().replace(" ", "").replace("i", "j").replace("I", "j")
        try:
            return complex(text)
        except ValueError as exc:
            raise ValidationError(f"cannot parse complex number {value!r}") from exc
    return complex(value)


def complex_pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True, eq=False)
class UnitCell:
    """One period of the chain: resonator lengths ``ell`` and spacings ``s``.

    ``s[N-1]`` is the gap between the last resonator of the cell and the first
    resonator of the next cell.
    """

    lengths: np.ndarray
    spacings: np.ndarray

    def __post_init__(self):
        lengths = _frozen(self.lengths)
        spacings = _frozen(self.spacings)
        if lengths.ndim != 1 or lengths.size == 0:
            raise ValidationError("lengths must be a non-empty 1D sequence")
        if spacings.shape != lengths.shape:
            raise ValidationError(
                f"need one spacing per resonator: {lengths.size} lengths, {spacings.size} spacings"
            )
        _check_positive("lengths", lengths)
        _check_positive("spacings", spacings)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "spacings", spacings)

    @property
    def N(self) -> int:
        return self.lengths.size

    @property
    def L(self) -> float:
        return float(np.sum(self.lengths) + np.sum(self.spacings))

    @property
    def x_left(self) -> np.ndarray:
        starts = np.concatenate(([0.0], np.cumsum(self.lengths + self.spacings)[:-1]))
        return starts

    @property
    def x_right(self) -> np.ndarray:
        return self.x_left + self.lengths

    @property
    def abscissae(self) -> np.ndarray:
        """Interleaved endpoints ``(x_1^L, x_1^R, ..., x_N^L, x_N^R)``."""
        out = np.empty(2 * self.N)
        out[0::2] = self.x_left
        out[1::2] = self.x_right
        return out

    @property
    def brillouin_zone(self) -> tuple[float, float]:
        return (-np.pi / self.L, np.pi / self.L)

    def alpha_grid(self, n: int) -> np.ndarray:
        """``n`` equispaced quasi-momenta covering ``(-pi/L, pi/L]``."""
        if n < 1:
            raise ValidationError("alpha grid needs at least one sample")
        return -np.pi / self.L + 2 * np.pi / self.L * (np.arange(n) + 1) / n

    @classmethod
    def from_abscissae(cls, x: Sequence[float], L: float) -> "UnitCell":
        x = np.asarray(x, dtype=float)
        lengths = x[1::2] - x[0::2]
        nxt = np.concatenate((x[2::2], [x[0] + L]))
        return cls(lengths, nxt - x[1::2])


@dataclass(frozen=True, eq=False)
class Materials:
    """Background ``(rho, kappa)`` and resonator ``(rho_b, kappa_i)`` parameters."""

    rho: float
    kappa: float
    rho_b: float
    kappa_i: np.ndarray

    def __post_init__(self):
        for name in ("rho", "kappa", "rho_b"):
            val = getattr(self, name)
            if not np.isreal(val) or not np.isfinite(val) or val <= 0:
                raise ValidationError(f"{name} must be a positive real number, got {val!r}")
            object.__setattr__(self, name, float(val))
        kappa_i = _frozen(np.atleast_1d(self.kappa_i), dtype=complex)
        for i, k in enumerate(kappa_i):
            if not np.isfinite(k) or k == 0:
                raise ValidationError(f"kappa_i[{i}] must be finite and nonzero, got {k!r}")
        object.__setattr__(self, "kappa_i", kappa_i)

    @classmethod
    def from_speeds(cls, speeds, delta: float, background_speed: float = 1.0) -> "Materials":
        """Materials with ``rho = 1`` realising given speeds and contrast."""
        speeds = np.atleast_1d(np.asarray(speeds, dtype=complex))
        return cls(
            rho=1.0,
            kappa=background_speed**2,
            rho_b=delta,
            kappa_i=delta * speeds**2,
        )

    @property
    def N(self) -> int:
        return self.kappa_i.size

    @property
    def delta(self) -> float:
        return self.rho_b / self.rho

    @property
    def speeds(self) -> np.ndarray:
        """Resonator speeds ``v_i = sqrt(kappa_i / rho_b)`` (principal root)."""
        return np.sqrt(self.kappa_i / self.rho_b)

    @property
    def v(self) -> float:
        return float(np.sqrt(self.kappa / self.rho))

    @property
    def hermitian(self) -> bool:
        return bool(np.all(self.kappa_i.imag == 0))

    def wave_numbers(self, omega: complex) -> tuple[complex, np.ndarray]:
        """Background and resonator wave numbers ``(k, k_i)`` at frequency ``omega``."""
        return omega / self.v, omega / self.speeds


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """A truncated chain of ``M`` resonators separated by ``M - 1`` gaps."""

    lengths: np.ndarray
    gaps: np.ndarray
    speeds: np.ndarray
    delta: float = 1e-3
    background_speed: float = 1.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        lengths = _frozen(np.atleast_1d(self.lengths))
        gaps = _frozen(np.atleast_1d(self.gaps) if len(np.atleast_1d(self.gaps)) else [])
        speeds = _frozen(np.atleast_1d(self.speeds), dtype=complex)
        if lengths.size == 0:
            raise ValidationError("a finite chain needs at least one resonator")
        if gaps.size != lengths.size - 1:
            raise ValidationError(
                f"{lengths.size} resonators need {lengths.size - 1} gaps, got {gaps.size}"
            )
        if speeds.size != lengths.size:
            raise ValidationError(f"need {lengths.size} speeds, got {speeds.size}")
        _check_positive("lengths", lengths)
        _check_positive("gaps", gaps)
        for i, v in enumerate(speeds):
            if not np.isfinite(v) or v == 0:
                raise ValidationError(f"speeds[{i}] must be finite and nonzero, got {v!r}")
        if not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta!r}")
        if not self.background_speed > 0:
            raise ValidationError("background speed must be positive")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "background_speed", float(self.background_speed))

    @property
    def M(self) -> int:
        return self.lengths.size

    @property
    def x_left(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.lengths[:-1] + self.gaps)))

    @property
    def x_right(self) -> np.ndarray:
        return self.x_left + self.lengths

    @property
    def abscissae(self) -> np.ndarray:
        out = np.empty(2 * self.M)
        out[0::2] = self.x_left
        out[1::2] = self.x_right
        return out

    @property
    def hermitian(self) -> bool:
        return bool(np.all(self.speeds.imag == 0))

    def reversed(self) -> "FiniteChain":
        return FiniteChain(
            self.lengths[::-1], self.gaps[::-1], self.speeds[::-1],
            self.delta, self.background_speed, self.label,
        )

    def replace(self, **changes) -> "FiniteChain":
        params = dict(
            lengths=self.lengths, gaps=self.gaps, speeds=self.speeds,
            delta=self.delta, background_speed=self.background_speed, label=self.label,
        )
        params.update(changes)
        return FiniteChain(**params)


def build_periodic(lengths, spacings, materials: Materials) -> tuple[UnitCell, Materials]:
    cell = UnitCell(lengths, spacings)
    if materials.N != cell.N:
        raise ValidationError(f"{cell.N} resonators but {materials.N} bulk moduli")
    return cell, materials


def build_geometric_defect(
    s_a: float,
    s_b: float,
    ell: float,
    n_dimers_left: int,
    n_dimers_right: int,
    speed: complex = 1.0,
    delta: float = 1e-3,
    background_speed: float = 1.0,
) -> FiniteChain:
    """Dimer chain whose spacing pattern flips at a central resonator.

    The left half repeats ``(s_b, s_a)`` and the right half ``(s_a, s_b)``, so
    the interface resonator is flanked by two ``s_a`` gaps.  With ``n`` dimers on
    each side the chain has ``2 * (n_left + n_right) + 1`` resonators, e.g. 41
    for ``(10, 10)``; ``(10, 9)`` gives the 39-resonator array.
    """
    if n_dimers_left < 1 or n_dimers_right < 1:
        raise ValidationError("dimer counts must be at least 1")
    gaps = [s_b, s_a] * int(n_dimers_left) + [s_a, s_b] * int(n_dimers_right)
    M = len(gaps) + 1
    return FiniteChain(
        np.full(M, float(ell)), gaps, np.full(M, complex(speed)), delta, background_speed,
        label="geometric-defect",
    )


def build_material_defect(
    v_1: complex,
    v_2: complex,
    ell: float,
    s: float,
    n_dimers_left: int,
    n_dimers_right: int,
    delta: float = 1e-3,
    background_speed: float = 1.0,
) -> FiniteChain:
    """Equal-dimer chain with speeds ``(v_1, v_2)`` left of the interface and
    ``(v_2, v_1)`` right of it."""
    if n_dimers_left < 1 or n_dimers_right < 1:
        raise ValidationError("dimer counts must be at least 1")
    speeds = [v_1, v_2] * int(n_dimers_left) + [v_2, v_1] * int(n_dimers_right)
    M = len(speeds)
    return FiniteChain(
        np.full(M, float(ell)), np.full(M - 1, float(s)), speeds, delta, background_speed,
        label="material-defect",
    )


def effective_sound_speed(cell: UnitCell, materials: Materials) -> float:
    """Slope ``c`` of the acoustic band at ``alpha = 0`` (homogenised speed)."""
    if not materials.hermitian or np.any(materials.kappa_i != materials.kappa_i[0]):
        raise UnsupportedConfigurationError(
            "effective speed needs real and equal resonator bulk moduli"
        )
    kappa_b = materials.kappa_i[0].real
    inside = float(np.sum(cell.lengths))
    outside = cell.L - inside
    num = inside / materials.rho_b + outside / materials.rho
    den = inside / kappa_b + outside / materials.kappa
    return float(np.sqrt(num / den))


def cell_from_descriptor(desc: dict) -> tuple[UnitCell, Materials]:
    """Parse the JSON geometry descriptor.

    ``{"lengths": [...], "spacings": [...], "rho": r, "kappa": k,
    "rho_b": rb, "kappa_i": [[re, im], ...]}``
    """
    allowed = {"lengths", "spacings", "rho", "kappa", "rho_b", "kappa_i"}
    unknown = set(desc) - allowed
    if unknown:
        raise ValidationError(f"unknown geometry keys: {sorted(unknown)}")
    missing = allowed - set(desc)
    if missing:
        raise ValidationError(f"missing geometry keys: {sorted(missing)}")
    kappa_i = [parse_complex(k) for k in desc["kappa_i"]]
    materials = Materials(desc["rho"], desc["kappa"], desc["rho_b"], kappa_i)
    return build_periodic(desc["lengths"], desc["spacings"], materials)


def cell_to_descriptor(cell: UnitCell, materials: Materials) -> dict:
    return {
        "lengths": cell.lengths.tolist(),
        "spacings": cell.spacings.tolist(),
        "rho": materials.rho,
        "kappa": materials.kappa,
        "rho_b": materials.rho_b,
        "kappa_i": [complex_pair(k) for k in materials.kappa_i],
    }
