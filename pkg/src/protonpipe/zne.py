"""Zero-noise extrapolation: gate folding, polynomial fits with holdout
model selection, barrier estimators and stratified bootstrap."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import Circuit
from .errors import AlignmentError, ValidationError
from .noise import NoiseModel, noisy_expectation
from .pauli import PauliSum


def fold(c: Circuit, scale: float, seed: int = 0) -> Circuit:
    """Locally fold two-qubit gates ``G -> G G^dag G`` so the two-qubit count
    becomes ``round(scale * N)`` up to the granularity of two per fold."""
    if scale < 1:
        raise ValidationError(f"noise scale must be >= 1, got {scale}")
    idx = [i for i, g in enumerate(c.gates) if g.is_two_qubit]
    n = len(idx)
    if n == 0 or scale == 1:
        return Circuit(c.n_qubits, c.gates, dict(c.meta))
    folds = math.floor((scale - 1) * n / 2 + 0.5)
    per_gate = np.full(n, folds // n)
    extra = np.random.default_rng(seed).choice(n, folds % n, replace=False)
    per_gate[extra] += 1
    count = dict(zip(idx, per_gate))
    gates = []
    for i, g in enumerate(c.gates):
        gates.append(g)
        for _ in range(count.get(i, 0)):
            gates += [g.inverse(), g]
    meta = dict(c.meta)
    meta["fold_scale"] = scale
    return Circuit(c.n_qubits, gates, meta)


@dataclass
class ZneDataset:
    """Energy samples per noise scale; replicate ``j`` at every scale comes
    from the same (fold seed, shot batch) index."""

    samples: dict[float, np.ndarray]

    def __post_init__(self):
        self.samples = {float(k): np.asarray(v, dtype=float).ravel() for k, v in sorted(self.samples.items())}
        if any(k < 1 for k in self.samples):
            raise ValidationError("noise scales must be >= 1")
        if any(len(v) == 0 for v in self.samples.values()):
            raise ValidationError("every noise scale needs at least one replicate")

    def validate(self) -> None:
        if 1.0 not in self.samples:
            raise ValidationError("dataset must contain the unscaled point lambda = 1")
        if len(self.samples) < 2:
            raise ValidationError("at least two distinct noise scales are required")

    @property
    def lambdas(self) -> np.ndarray:
        return np.array(list(self.samples))

    def counts(self) -> np.ndarray:
        return np.array([len(v) for v in self.samples.values()])

    def means(self) -> np.ndarray:
        return np.array([v.mean() for v in self.samples.values()])

    def sems(self) -> np.ndarray:
        return np.array([v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else np.nan
                         for v in self.samples.values()])

    def difference(self, other: "ZneDataset") -> "ZneDataset":
        """Replicate-paired ``other - self`` per scale."""
        if list(self.samples) != list(other.samples):
            raise AlignmentError(f"noise-scale grids differ: {list(self.samples)} vs {list(other.samples)}")
        for lam in self.samples:
            if len(self.samples[lam]) != len(other.samples[lam]):
                raise AlignmentError(f"replicate counts differ at lambda={lam}")
        return ZneDataset({lam: other.samples[lam] - self.samples[lam] for lam in self.samples})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "replicate", "energy"])
        for lam, vals in self.samples.items():
            for j, v in enumerate(vals):
                w.writerow([repr(lam), j, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ZneDataset":
        rows: dict[float, list[float]] = {}
        for row in csv.DictReader(io.StringIO(text)):
            rows.setdefault(float(row["lambda"]), []).append(float(row["energy"]))
        return cls(rows)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path: str | Path) -> "ZneDataset":
        return cls.from_csv(Path(path).read_text())


def collect(c: Circuit, H: PauliSum, nm: NoiseModel, lambdas: Sequence[float], replicates: int,
            shots: int | None = None, seed: int = 0) -> ZneDataset:
    """Noisy energies of independently folded copies of ``c``."""
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    out: dict[float, list[float]] = {}
    for li, lam in enumerate(lambdas):
        vals = []
        for j in range(replicates):
            ss = np.random.SeedSequence([seed, li, j])
            fold_seed, shot_seed = ss.generate_state(2)
            folded = fold(c, lam, int(fold_seed))
            vals.append(noisy_expectation(folded, H, nm, shots, np.random.default_rng(int(shot_seed))))
        out[float(lam)] = vals
    return ZneDataset(out)


# fitting


@dataclass
class PolyFit:
    coefficients: np.ndarray  # ascending powers
    covariance: np.ndarray
    weighted: bool

    def predict(self, lam) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(lam, dtype=float), self.coefficients)


def fit_polynomial(lambdas: np.ndarray, means: np.ndarray, degree: int,
                   sems: np.ndarray | None = None) -> PolyFit:
    """Least squares on per-scale means.

    With finite positive standard errors the fit is weighted and the
    covariance absolute, ``(X^T W X)^-1``; otherwise ordinary least squares
    with the residual variance (zero covariance when there are no degrees
    of freedom left).
    """
    x = np.vander(np.asarray(lambdas, dtype=float), degree + 1, increasing=True)
    y = np.asarray(means, dtype=float)
    if len(y) < degree + 1:
        raise ValidationError(f"degree {degree} needs {degree + 1} noise scales, got {len(y)}")
    weighted = sems is not None and np.all(np.isfinite(sems)) and np.all(np.asarray(sems) > 0)
    if weighted:
        w = 1.0 / np.asarray(sems) ** 2
        xtwx = x.T @ (x * w[:, None])
        cov = np.linalg.inv(xtwx)
        coef = cov @ (x.T @ (w * y))
    else:
        coef, *_ = np.linalg.lstsq(x, y, rcond=None)
        dof = len(y) - (degree + 1)
        if dof > 0:
            s2 = float(np.sum((y - x @ coef) ** 2)) / dof
            cov = s2 * np.linalg.pinv(x.T @ x)
        else:
            cov = np.zeros((degree + 1, degree + 1))
    return PolyFit(coef, cov, bool(weighted))


def _fit_dataset(data: ZneDataset, degree: int) -> PolyFit:
    return fit_polynomial(data.lambdas, data.means(), degree, data.sems())


@dataclass
class FitReport:
    degree: int
    coefficients: np.ndarray
    intercept: float
    intercept_se: float
    rmse: dict[int, float]
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": self.intercept,
            "intercept_se": self.intercept_se,
            "holdout_rmse": {str(k): v for k, v in self.rmse.items()},
            "notes": self.notes,
        }


def holdout_split(data: ZneDataset, fraction: float, seed: int) -> tuple[ZneDataset, dict[float, np.ndarray]]:
    """Per-scale stratified split; at least one training replicate per scale."""
    rng = np.random.default_rng(seed)
    train, test = {}, {}
    for lam, vals in data.samples.items():
        k = min(int(round(fraction * len(vals))), len(vals) - 1)
        perm = rng.permutation(len(vals))
        test[lam] = vals[perm[:k]]
        train[lam] = vals[perm[k:]]
    return ZneDataset(train), test


def holdout_rmse(data: ZneDataset, degrees: Iterable[int], fraction: float = 0.25, seed: int = 0,
                 n_splits: int = 20) -> tuple[dict[int, float], list[str]]:
    """Held-out RMSE per candidate degree, pooled over ``n_splits`` seeded
    stratified splits (a single split is too noisy to rank nested fits)."""
    notes: list[str] = []
    degrees = list(degrees)
    n_lam = len(data.samples)
    fittable = []
    for d in degrees:
        if d + 1 > n_lam:
            notes.append(f"degree {d} skipped: {d + 1} parameters but {n_lam} noise scales")
        else:
            fittable.append(d)
    can_hold = fraction > 0 and any(round(fraction * c) >= 1 and c > 1 for c in data.counts())
    rmse: dict[int, float] = {}
    if can_hold:
        sq = {d: 0.0 for d in fittable}
        total = 0
        for k in range(n_splits):
            train, test = holdout_split(data, fraction, seed + k)
            held = np.concatenate(list(test.values()))
            lam_held = np.concatenate([np.full(len(v), lam) for lam, v in test.items()])
            total += held.size
            for d in fittable:
                sq[d] += float(np.sum((_fit_dataset(train, d).predict(lam_held) - held) ** 2))
        rmse = {d: float(np.sqrt(v / total)) for d, v in sq.items()}
    else:
        # single replicates: leave one noise scale out instead
        notes.append("no replicates to hold out; using leave-one-scale-out on the means")
        lam, y = data.lambdas, data.means()
        for d in fittable:
            if d + 2 > n_lam:
                notes.append(f"degree {d} skipped: too few noise scales for leave-one-out")
                continue
            errs = []
            for i in range(n_lam):
                keep = np.arange(n_lam) != i
                errs.append(fit_polynomial(lam[keep], y[keep], d).predict(lam[i]) - y[i])
            rmse[d] = float(np.sqrt(np.mean(np.square(errs))))
    return rmse, notes


def fit_extrapolate(data: ZneDataset, degrees: Iterable[int] = (1, 2, 3), holdout: float = 0.25,
                    seed: int = 0, n_splits: int = 20) -> FitReport:
    """Choose the degree with the lowest holdout RMSE (ties: lower degree),
    refit on all replicates and report the ``lambda -> 0`` intercept."""
    data.validate()
    if not 0 <= holdout < 1:
        raise ValidationError("holdout fraction must lie in [0, 1)")
    degrees = sorted(set(int(d) for d in degrees))
    if not degrees or degrees[0] < 0:
        raise ValidationError("candidate degrees must be non-negative")
    rmse, notes = holdout_rmse(data, degrees, holdout, seed, n_splits)
    if not rmse:
        usable = [d for d in degrees if d + 1 <= len(data.samples)]
        if not usable:
            raise ValidationError("no candidate degree can be fitted to this dataset")
        notes.append("degree chosen without holdout validation")
        best = usable[0]
    else:
        lo = min(rmse.values())
        best = min(d for d, v in rmse.items() if v <= lo * (1 + 1e-12))
    fit = _fit_dataset(data, best)
    if not fit.weighted:
        notes.append("unweighted fit: some noise scales lack a positive standard error")
    return FitReport(best, fit.coefficients, float(fit.coefficients[0]),
                     float(np.sqrt(max(fit.covariance[0, 0], 0.0))), rmse, notes)


@dataclass
class BarrierEstimate:
    delta: float
    sigma: float
    method: str
    reports: dict[str, FitReport]


def quadrature(*sigmas: float) -> float:
    return float(math.sqrt(sum(s * s for s in sigmas)))


def barrier_fit_first(left: ZneDataset, middle: ZneDataset, degrees: Iterable[int] = (1, 2, 3),
                      holdout: float = 0.25, seed: int = 0) -> BarrierEstimate:
    fl = fit_extrapolate(left, degrees, holdout, seed)
    fm = fit_extrapolate(middle, degrees, holdout, seed)
    return BarrierEstimate(fm.intercept - fl.intercept, quadrature(fl.intercept_se, fm.intercept_se),
                           "fit-first", {"left": fl, "middle": fm})


def barrier_diff_first(left: ZneDataset, middle: ZneDataset, degrees: Iterable[int] = (1, 2, 3),
                       holdout: float = 0.25, seed: int = 0) -> BarrierEstimate:
    diff = left.difference(middle)
    fd = fit_extrapolate(diff, degrees, holdout, seed)
    return BarrierEstimate(fd.intercept, fd.intercept_se, "diff-first", {"difference": fd})


# bootstrap


@dataclass
class BootstrapResult:
    median: float
    p15: float
    p85: float
    estimates: np.ndarray
    note: str = ""


def resample(data: ZneDataset, rng: np.random.Generator) -> ZneDataset:
    """Stratified resample: replicate counts per scale are preserved."""
    return ZneDataset({lam: v[rng.integers(0, len(v), len(v))] for lam, v in data.samples.items()})


def _summarize(est: np.ndarray, note: str = "") -> BootstrapResult:
    p15, med, p85 = np.percentile(est, [15, 50, 85])
    return BootstrapResult(float(med), float(p15), float(p85), est, note)


def _degenerate(*datasets: ZneDataset) -> bool:
    return all(np.ptp(v) == 0 for d in datasets for v in d.samples.values())


def bootstrap_interval(data: ZneDataset, degree: int, n_boot: int = 1000, seed: int = 0) -> BootstrapResult:
    """Median and 15th/85th percentiles of the bootstrapped intercept."""
    if n_boot < 100:
        raise ValidationError("n_boot must be >= 100")
    data.validate()
    if _degenerate(data):
        c = _fit_dataset(data, degree).coefficients[0]
        return BootstrapResult(float(c), float(c), float(c), np.full(n_boot, c),
                               "zero-variance data: interval collapsed")
    rng = np.random.default_rng(seed)
    est = np.array([_fit_dataset(resample(data, rng), degree).coefficients[0] for _ in range(n_boot)])
    return _summarize(est)


def bootstrap_fit_first(left: ZneDataset, middle: ZneDataset, degree_left: int, degree_middle: int,
                        n_boot: int = 1000, seed: int = 0) -> BootstrapResult:
    """Bootstrap of ``intercept(middle) - intercept(left)`` with independent
    stratified resampling of the two datasets."""
    if n_boot < 100:
        raise ValidationError("n_boot must be >= 100")
    left.validate()
    middle.validate()
    if _degenerate(left, middle):
        d = (_fit_dataset(middle, degree_middle).coefficients[0]
             - _fit_dataset(left, degree_left).coefficients[0])
        return BootstrapResult(float(d), float(d), float(d), np.full(n_boot, d),
                               "zero-variance data: interval collapsed")
    rng = np.random.default_rng(seed)
    est = np.array([
        _fit_dataset(resample(middle, rng), degree_middle).coefficients[0]
        - _fit_dataset(resample(left, rng), degree_left).coefficients[0]
        for _ in range(n_boot)
    ])
    return _summarize(est)


def bootstrap_table(rows: Mapping[str, BootstrapResult], unit_scale: float = 1e3) -> str:
    """CSV with one row per method: median, 15th and 85th percentiles (mHa by default)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "median", "p15", "p85"])
    for name, r in rows.items():
        w.writerow([name] + [f"{v * unit_scale:.6f}" for v in (r.median, r.p15, r.p85)])
    return buf.getvalue()
