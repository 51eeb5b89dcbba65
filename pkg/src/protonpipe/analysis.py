"""Physics post-processing: barriers, transition-state rate ratios,
entanglement entropy and proton densities on grids."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError
from .hamiltonian import LmrWeights
from .sim import DensityOperator

K_B_HARTREE = 3.166811563e-6  # Ha / K
METHODS = ("CASCI", "HF", "VQE-deep", "VQE-shallow", "AQC-high", "AQC-low", "ZNE")
LEFT, MIDDLE = "300", "030"


@dataclass(frozen=True)
class PathPoint:
    label: str
    energy: float  # Ha
    method: str
    uncertainty: float | None = None

    def __post_init__(self):
        LmrWeights.from_label(self.label)
        if self.method not in METHODS:
            raise ValidationError(f"unknown method tag {self.method!r}")

    @property
    def weights(self) -> LmrWeights:
        return LmrWeights.from_label(self.label)


@dataclass(frozen=True)
class Barrier:
    delta: float
    uncertainty: float | None


def barrier(points: Iterable[PathPoint], method: str | None = None) -> Barrier:
    """``E(030) - E(300)`` for one method, errors added in quadrature."""
    pts = [p for p in points if method is None or p.method == method]
    methods = {p.method for p in pts}
    if len(methods) > 1:
        raise ValidationError(f"points mix methods {sorted(methods)}; pass method=")
    by_label = {p.label: p for p in pts}
    missing = [lab for lab in (LEFT, MIDDLE) if lab not in by_label]
    if missing:
        raise ValidationError(f"barrier needs labels {missing} for method {method or methods}")
    left, mid = by_label[LEFT], by_label[MIDDLE]
    sig = None
    if left.uncertainty is not None or mid.uncertainty is not None:
        sig = math.hypot(left.uncertainty or 0.0, mid.uncertainty or 0.0)
    return Barrier(mid.energy - left.energy, sig)


def _check_temperature(t: float) -> None:
    if not t > 0:
        raise ValidationError(f"temperature must be positive, got {t}")


def rate_constant_ratio(delta_e: float, temperature: float) -> float:
    """``exp(-dE / k_B T)``; rate constants are only defined up to a prefactor."""
    _check_temperature(temperature)
    return math.exp(-delta_e / (K_B_HARTREE * temperature))


def rate_sensitivity(delta_e: float, temperature: float) -> tuple[float, float]:
    """Fractional rate error from a barrier error: (linearised, exact)."""
    _check_temperature(temperature)
    x = delta_e / (K_B_HARTREE * temperature)
    return -x, math.expm1(-x)


def entanglement_entropy(rho: DensityOperator | np.ndarray, cutoff: float = 1e-14) -> float:
    """Von Neumann entropy in nats."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("density matrix must be square")
    tr = np.trace(m).real
    if abs(tr - 1) > 1e-6:
        raise ValidationError(f"density matrix trace {tr:.8f} deviates from 1")
    if not np.allclose(m, m.conj().T, atol=1e-10):
        raise ValidationError("density matrix is not Hermitian")
    w = np.linalg.eigvalsh(m)
    w = w[w > cutoff]
    return float(max(-np.sum(w * np.log(w)), 0.0))


@dataclass(frozen=True, eq=False)
class OrbitalGrid:
    """Real orbital amplitudes ``phi[P, i]`` on points ``r[i]`` with
    quadrature weights ``w[i]`` (Angstrom^3)."""

    points: np.ndarray
    amplitudes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        amp = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DimensionError("grid points must have shape (m, 3)")
        if amp.shape[1] != len(pts) or w.shape != (len(pts),):
            raise DimensionError("amplitudes/weights do not match the number of grid points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "weights", w)

    @property
    def n_orbitals(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def from_csv(cls, path: str | Path) -> "OrbitalGrid":
        """Columns ``x, y, z, w, phi0, phi1, ...``."""
        rows = list(csv.reader(io.StringIO(Path(path).read_text())))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        if [h.strip() for h in header[:4]] != ["x", "y", "z", "w"] or len(header) < 5:
            raise DimensionError("grid CSV must start with columns x,y,z,w followed by orbitals")
        return cls(body[:, :3], body[:, 4:].T, body[:, 3])

    @classmethod
    def gaussians(cls, centers: Sequence[Sequence[float]], width: float = 0.3, extent: float = 2.0,
                  n: int = 41) -> "OrbitalGrid":
        """Normalized s-type Gaussians on a uniform XY grid (z = 0), a
        stand-in for real protonic orbitals in toy runs."""
        ax = np.linspace(-extent, extent, n)
        x, y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([x.ravel(), y.ravel(), np.zeros(x.size)])
        h = ax[1] - ax[0]
        w = np.full(len(pts), h * h)
        amps = []
        for c in centers:
            d2 = np.sum((pts[:, :2] - np.asarray(c, dtype=float)[:2]) ** 2, axis=1)
            g = np.exp(-d2 / (2 * width ** 2))
            amps.append(g / np.sqrt(np.sum(w * g * g)))
        return cls(pts, np.array(amps), w)


@dataclass(frozen=True, eq=False)
class ProtonDensity:
    values: np.ndarray
    integral: float
    mean_position: np.ndarray

    def to_csv(self, grid: OrbitalGrid) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "z", "rho"])
        for r, v in zip(grid.points, self.values):
            w.writerow([f"{r[0]:.10g}", f"{r[1]:.10g}", f"{r[2]:.10g}", f"{v:.12e}"])
        return buf.getvalue()


def proton_density(gamma: np.ndarray, grid: OrbitalGrid) -> ProtonDensity:
    """``rho(r) = sum_PQ gamma_PQ phi_P(r) phi_Q(r)`` plus grid integral and centroid."""
    gamma = np.asarray(gamma)
    if gamma.shape != (grid.n_orbitals, grid.n_orbitals):
        raise DimensionError(f"1-RDM shape {gamma.shape} does not match {grid.n_orbitals} grid orbitals")
    phi = grid.amplitudes
    values = np.einsum("pi,pq,qi->i", phi, gamma, phi).real
    integral = float(np.sum(grid.weights * values))
    if abs(integral) > 1e-300:
        mean = (grid.weights * values) @ grid.points / integral
    else:
        mean = np.full(3, np.nan)
    return ProtonDensity(values, integral, mean)
