"""End-to-end workflow: integrals -> path Hamiltonians -> exact, ADAPT-VQE and
AQC states -> optional noisy ZNE barrier -> tables, rates, densities."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import platform
import warnings
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import analysis
from .adapt import adapt_vqe, make_pool
from .aqc import AqcConfig, compile_state
from .circuit import CouplingMap, transpile, two_qubit_metrics
from .errors import ConfigurationError, ProtonPipeError, StageError
from .hamiltonian import (TRAJECTORY, LmrWeights, NeoIntegrals, assemble, interpolate, parse_integrals,
                          toy_lmr)
from .noise import build_noise_model, synthetic_calibration
from .sim import StateVector, exact_ground_state, expectation, fidelity, reduced_density, orbital_1rdm, run
from .zne import (barrier_diff_first, barrier_fit_first, bootstrap_fit_first, bootstrap_interval,
                  bootstrap_table, collect)

log = logging.getLogger(__name__)

STAGES = ("casci", "hf", "vqe-shallow", "vqe-deep", "aqc-high", "aqc-low", "zne")
METHOD_TAG = {"casci": "CASCI", "hf": "HF", "vqe-shallow": "VQE-shallow", "vqe-deep": "VQE-deep",
              "aqc-high": "AQC-high", "aqc-low": "AQC-low", "zne": "ZNE"}


@dataclass
class PipelineConfig:
    integrals: dict[str, str] | None = None
    toy: dict[str, Any] | None = None
    occupied_electron: list[int] = field(default_factory=lambda: [0])
    occupied_proton: list[int] = field(default_factory=lambda: [0])
    labels: list[str] = field(default_factory=lambda: list(TRAJECTORY))
    stages: list[str] = field(default_factory=lambda: list(STAGES))
    pool: str = "fermionic"
    thresholds: dict[str, float] = field(default_factory=lambda: {"vqe-shallow": 1e-2, "vqe-deep": 1e-3})
    adapt_max_iter: int = 200
    aqc: dict[str, Any] = field(default_factory=dict)
    coupling: str = "heavyhex:2"
    zne: dict[str, Any] = field(default_factory=dict)
    temperatures: list[float] = field(default_factory=lambda: [100.0, 120.0, 200.0, 300.0])
    density_grid: str | None = None
    barrier_band: float = 2.0
    seed: int = 0
    base_dir: str = "."

    def __post_init__(self):
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ConfigurationError(f"unknown stages {unknown}; expected a subset of {list(STAGES)}")
        if (self.integrals is None) == (self.toy is None):
            raise ConfigurationError("config needs exactly one of 'integrals' or 'toy'")
        if self.integrals is not None and set(self.integrals) != {"left", "middle", "right"}:
            raise ConfigurationError("'integrals' must name files for left, middle and right")
        for lab in self.labels:
            LmrWeights.from_label(lab)
        if self.barrier_band < 1:
            raise ConfigurationError("barrier_band must be >= 1")

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        return cls(**data, base_dir=str(base_dir))

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
        return cls.from_dict(data, path.parent)

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "base_dir"}
        return json.loads(json.dumps(d))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


# formatting helpers: fixed formats keep result tables byte-stable


def _f(x: float | None, digits: int = 12) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.{digits}f}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


@dataclass
class PointResult:
    energy: float
    state: StateVector | None = None
    circuit: Any = None
    fidelity: float | None = None
    twoq: tuple[int, int] | None = None
    uncertainty: float | None = None


@dataclass
class PipelineResult:
    run_dir: Path
    manifest: dict
    points: list[analysis.PathPoint]
    results: dict[str, dict[str, PointResult]]

    @property
    def ok(self) -> bool:
        return all(s["status"] != "failed" for s in self.manifest["stages"].values())


class _Runner:
    def __init__(self, cfg: PipelineConfig, run_dir: Path):
        self.cfg = cfg
        self.run_dir = run_dir
        self.results: dict[str, dict[str, PointResult]] = {}
        self.status: dict[str, dict] = {}
        self.extra: dict[str, Any] = {}

    # setup

    def load_systems(self) -> None:
        cfg = self.cfg
        if cfg.toy is not None:
            t = dict(cfg.toy)
            ints = toy_lmr(int(t.get("n_electron", 2)), int(t.get("n_proton", 2)), int(t.get("seed", cfg.seed)),
                           scale=float(t.get("scale", 1.0)))
        else:
            ints = {k: parse_integrals(cfg.resolve(v)) for k, v in cfg.integrals.items()}
        layouts = {i.layout for i in ints.values()}
        if len(layouts) != 1:
            raise ConfigurationError("left/middle/right integrals must share one mode layout")
        self.layout = ints["left"].layout
        hl, hm, hr = (assemble(ints[k]) for k in ("left", "middle", "right"))
        self.hams = {lab: interpolate(hl, hm, hr, LmrWeights.from_label(lab)) for lab in cfg.labels}
        self.reference = self.layout.occupation_mask(cfg.occupied_electron, cfg.occupied_proton)
        self.sector = (len(cfg.occupied_electron), len(cfg.occupied_proton))
        self.cmap = CouplingMap.from_spec(cfg.coupling, self.layout.n_modes)

    # stages

    def stage_casci(self) -> None:
        out = {}
        for lab, H in self.hams.items():
            e, psi = exact_ground_state(H, self.sector, self.layout)
            out[lab] = PointResult(e, psi, None, 1.0, None)
            d = self.run_dir / "casci" / lab
            d.mkdir(parents=True, exist_ok=True)
            psi.save(d / "state.bin", {"label": lab, "energy": e})
        self.results["casci"] = out

    def stage_hf(self) -> None:
        psi = StateVector.from_bits(self.reference)
        out = {}
        for lab, H in self.hams.items():
            out[lab] = PointResult(expectation(psi, H), psi, None, self._fid(lab, psi), (0, 0))
        self.results["hf"] = out

    def _fid(self, lab: str, psi: StateVector) -> float | None:
        casci = self.results.get("casci")
        return fidelity(casci[lab].state, psi) if casci else None

    def _stage_vqe(self, name: str) -> None:
        cfg = self.cfg
        pool = make_pool(self.layout, cfg.occupied_electron, cfg.occupied_proton, cfg.pool)
        out = {}
        for lab, H in self.hams.items():
            exact = self.results["casci"][lab].energy
            st, circ = adapt_vqe(H, pool, float(cfg.thresholds[name]), self.reference, exact,
                                 max_iter=cfg.adapt_max_iter, seed=cfg.seed)
            if st.stagnated:
                warnings.warn(f"{name} {lab}: ADAPT-VQE stagnated above its threshold", stacklevel=2)
            psi = st.state()
            routed = transpile(circ, self.cmap)
            out[lab] = PointResult(st.energy, psi, circ, self._fid(lab, psi), two_qubit_metrics(routed))
            d = self.run_dir / name / lab
            d.mkdir(parents=True, exist_ok=True)
            st.save(d / "adapt.json")
            circ.save(d / "circuit.txt")
            routed.save(d / "circuit_transpiled.txt")
            psi.save(d / "state.bin", {"label": lab, "energy": st.energy})
        self.results[name] = out

    def _stage_aqc(self, name: str) -> None:
        cfg = self.cfg
        source = cfg.aqc.get("source", "vqe-shallow")
        if source not in self.results:
            raise StageError(f"AQC source stage {source!r} has no results")
        opts = {k: cfg.aqc[k] for k in ("block_budget", "reoptimize_every", "max_evals") if k in cfg.aqc}
        aqc_cfg = AqcConfig.preset(name.split("-")[1], self.cmap, seed=cfg.seed, **opts)
        out = {}
        for lab, H in self.hams.items():
            target = self.results[source][lab].state
            res = compile_state(target, aqc_cfg)
            psi = run(res.circuit)
            routed = transpile(res.circuit, self.cmap)
            out[lab] = PointResult(expectation(psi, H), psi, res.circuit, self._fid(lab, psi),
                                   two_qubit_metrics(routed))
            d = self.run_dir / name / lab
            d.mkdir(parents=True, exist_ok=True)
            res.circuit.save(d / "circuit.txt")
            routed.save(d / "circuit_transpiled.txt")
            report = res.report()
            report["fidelity_vs_source"] = report.pop("fidelity")
            _write_json(d / "aqc.json", report)
        self.results[name] = out

    def stage_zne(self) -> None:
        cfg, z = self.cfg, self.cfg.zne
        source = z.get("source", "aqc-low")
        if source not in self.results:
            raise StageError(f"ZNE source stage {source!r} has no results")
        left, middle = analysis.LEFT, analysis.MIDDLE
        if left not in self.hams or middle not in self.hams:
            raise StageError("ZNE needs the 300 and 030 path points")
        noise_src = z.get("noise")
        lambdas = [float(x) for x in z.get("lambdas", [1, 2, 3, 4])]
        reps = int(z.get("replicates", 10))
        shots = z.get("shots", 1000)
        degrees = [int(d) for d in z.get("degrees", [1, 2, 3])]
        n_boot = int(z.get("bootstrap", 200))
        data = {}
        for i, lab in enumerate((left, middle)):
            circ = transpile(self.results[source][lab].circuit, self.cmap)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                nm = build_noise_model(cfg.resolve(noise_src) if noise_src else synthetic_calibration(self.cmap),
                                       self.cmap)
            data[lab] = collect(circ, self.hams[lab], nm, lambdas, reps, shots, seed=cfg.seed + 1000 * i)
            d = self.run_dir / "zne" / lab
            d.mkdir(parents=True, exist_ok=True)
            data[lab].save(d / "samples.csv")
        ff = barrier_fit_first(data[left], data[middle], degrees, seed=cfg.seed)
        df = barrier_diff_first(data[left], data[middle], degrees, seed=cfg.seed)
        fl, fm = ff.reports["left"], ff.reports["middle"]
        boot = {
            "Fit first": bootstrap_fit_first(data[left], data[middle], fl.degree, fm.degree, n_boot, cfg.seed),
            "Diff first": bootstrap_interval(data[left].difference(data[middle]), df.reports["difference"].degree,
                                             n_boot, cfg.seed),
        }
        self.results["zne"] = {
            left: PointResult(fl.intercept, uncertainty=fl.intercept_se),
            middle: PointResult(fm.intercept, uncertainty=fm.intercept_se),
        }
        self.extra["zne"] = {
            "fit_first": {"delta": ff.delta, "sigma": ff.sigma,
                          "fits": {k: v.to_json() for k, v in ff.reports.items()}},
            "diff_first": {"delta": df.delta, "sigma": df.sigma,
                           "fits": {k: v.to_json() for k, v in df.reports.items()}},
            "unmitigated": {lab: float(data[lab].means()[0]) for lab in data},
        }
        tables = self.run_dir / "tables"
        tables.mkdir(parents=True, exist_ok=True)
        (tables / "zne_bootstrap.csv").write_text(bootstrap_table(boot))
        _write_json(tables / "zne_fits.json", _round_floats(self.extra["zne"]))

    # driver

    def run(self) -> PipelineResult:
        cfg = self.cfg
        deps = {"casci": [], "hf": [], "vqe-shallow": ["casci"], "vqe-deep": ["casci"],
                "aqc-high": [cfg.aqc.get("source", "vqe-shallow")],
                "aqc-low": [cfg.aqc.get("source", "vqe-shallow")],
                "zne": [cfg.zne.get("source", "aqc-low")]}
        actions: dict[str, Callable[[], None]] = {
            "casci": self.stage_casci, "hf": self.stage_hf,
            "vqe-shallow": lambda: self._stage_vqe("vqe-shallow"),
            "vqe-deep": lambda: self._stage_vqe("vqe-deep"),
            "aqc-high": lambda: self._stage_aqc("aqc-high"),
            "aqc-low": lambda: self._stage_aqc("aqc-low"),
            "zne": self.stage_zne,
        }
        self.load_systems()
        wanted = [s for s in STAGES if s in cfg.stages]
        for stage in wanted:
            blocked = [d for d in deps[stage] if self.status.get(d, {}).get("status") != "ok"]
            if blocked:
                reason = f"requires stage(s) {blocked}"
                self.status[stage] = {"status": "skipped", "reason": reason}
                continue
            try:
                actions[stage]()
                self.status[stage] = {"status": "ok"}
            except ProtonPipeError as exc:
                log.error("stage %s failed: %s", stage, exc)
                self.status[stage] = {"status": "failed", "reason": f"{type(exc).__name__}: {exc}"}
        points = self.write_tables()
        manifest = self.write_manifest()
        return PipelineResult(self.run_dir, manifest, points, self.results)

    def write_tables(self) -> list[analysis.PathPoint]:
        cfg = self.cfg
        tables = self.run_dir / "tables"
        tables.mkdir(parents=True, exist_ok=True)
        points, rows = [], []
        for stage in STAGES:
            for lab in cfg.labels:
                r = self.results.get(stage, {}).get(lab)
                if r is None:
                    continue
                p = analysis.PathPoint(lab, r.energy, METHOD_TAG[stage], r.uncertainty)
                points.append(p)
                cnt, dep = r.twoq if r.twoq else (None, None)
                rows.append([lab, p.method, _f(r.energy), _f(r.uncertainty), _f(r.fidelity, 10),
                             "" if cnt is None else cnt, "" if dep is None else dep])
        _write_csv(tables / "path_points.csv",
                   ["label", "method", "energy_ha", "uncertainty_ha", "fidelity_vs_casci", "twoq_count",
                    "twoq_depth"], rows)

        # Table-2 shape: Left/Middle energies (mHa), barrier, resources
        t2, barriers = [], {}
        for stage in STAGES:
            res = self.results.get(stage, {})
            if analysis.LEFT not in res or analysis.MIDDLE not in res:
                continue
            pts = [p for p in points if p.method == METHOD_TAG[stage]]
            b = analysis.barrier(pts, METHOD_TAG[stage])
            if stage == "zne":
                b = analysis.Barrier(self.extra["zne"]["fit_first"]["delta"], self.extra["zne"]["fit_first"]["sigma"])
            barriers[stage] = b
            l, m = res[analysis.LEFT], res[analysis.MIDDLE]
            t2.append([METHOD_TAG[stage] + (" (fit first)" if stage == "zne" else ""),
                       *(("" if r.twoq is None else r.twoq[0]) for r in (l, m)),
                       *(("" if r.twoq is None else r.twoq[1]) for r in (l, m)),
                       _f(l.fidelity, 6), _f(m.fidelity, 6),
                       _f(l.energy * 1e3, 6), _f(m.energy * 1e3, 6), _f(b.delta * 1e3, 6),
                       _f(None if b.uncertainty is None else b.uncertainty * 1e3, 6)])
        if "zne" in self.extra:
            dfz = self.extra["zne"]["diff_first"]
            t2.append(["ZNE (diff first)", "", "", "", "", "", "", "", "", _f(dfz["delta"] * 1e3, 6),
                       _f(dfz["sigma"] * 1e3, 6)])
        _write_csv(tables / "table2.csv",
                   ["method", "twoq_count_L", "twoq_count_M", "twoq_depth_L", "twoq_depth_M", "fidelity_L",
                    "fidelity_M", "E_L_mHa", "E_M_mHa", "dE_mHa", "sigma_mHa"], t2)

        # Table-3 shape: error vs CASCI and resources per path point
        t3 = []
        casci = self.results.get("casci", {})
        for stage in ("vqe-deep", "vqe-shallow", "aqc-high", "aqc-low"):
            for lab in cfg.labels:
                r = self.results.get(stage, {}).get(lab)
                if r is None or lab not in casci:
                    continue
                t3.append([lab, METHOD_TAG[stage], _f(r.energy - casci[lab].energy), r.twoq[1], r.twoq[0]])
        _write_csv(tables / "table3.csv", ["label", "method", "error_ha", "twoq_depth", "twoq_count"], t3)

        # relative rate constants
        rates = []
        for stage, b in barriers.items():
            for t in cfg.temperatures:
                k = analysis.rate_constant_ratio(b.delta, t)
                rel = ""
                if "casci" in barriers:
                    rel = _f(analysis.rate_constant_ratio(b.delta - barriers["casci"].delta, t), 10)
                rates.append([METHOD_TAG[stage], _f(t, 3), _f(b.delta * 1e3, 6), f"{k:.10e}", rel])
        _write_csv(tables / "rates.csv", ["method", "temperature_K", "dE_mHa", "k_ratio", "k_over_casci"], rates)
        self.extra["barriers"] = {k: v.delta for k, v in barriers.items()}

        # proton-electron entanglement and proton densities from the exact states
        if casci:
            proton_qubits = list(self.layout.proton_modes)
            ent = []
            for lab in cfg.labels:
                if lab in casci and proton_qubits:
                    s = analysis.entanglement_entropy(reduced_density(casci[lab].state, proton_qubits))
                    ent.append([lab, _f(s)])
            _write_csv(tables / "entropy.csv", ["label", "entropy_nats"], ent)
            if cfg.density_grid and self.layout.n_proton:
                grid = (analysis.OrbitalGrid.gaussians([(x, 0.0, 0.0) for x in
                                                        np.linspace(-1.0, 1.0, self.layout.n_proton)])
                        if cfg.density_grid == "gaussian" else analysis.OrbitalGrid.from_csv(cfg.resolve(cfg.density_grid)))
                cent = []
                for lab in cfg.labels:
                    if lab not in casci:
                        continue
                    gamma = orbital_1rdm(casci[lab].state, self.layout, "p").real
                    dens = analysis.proton_density(gamma, grid)
                    path = self.run_dir / "density" / f"{lab}.csv"
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_text(dens.to_csv(grid))
                    cent.append([lab, *(_f(v, 8) for v in dens.mean_position), _f(dens.integral, 8)])
                _write_csv(tables / "proton_position.csv", ["label", "x", "y", "z", "integral"], cent)
        return points

    def write_manifest(self) -> dict:
        cfg = self.cfg
        checks = {}
        bars = self.extra.get("barriers", {})
        if "casci" in bars and "vqe-shallow" in bars:
            ref, got = bars["casci"], bars["vqe-shallow"]
            band = cfg.barrier_band
            ok = ref != 0 and np.sign(got) == np.sign(ref) and abs(ref) / band <= abs(got) <= abs(ref) * band
            checks["vqe_shallow_barrier_within_band"] = bool(ok)
        manifest = {
            "package": "protonpipe",
            "versions": {
                "protonpipe": _version(),
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "config_sha256": cfg.digest(),
            "config": cfg.to_dict(),
            "seeds": {"global": cfg.seed},
            "stages": {s: self.status.get(s, {"status": "not requested"}) for s in STAGES},
            "checks": checks,
            "tables": sorted(str(p.relative_to(self.run_dir)) for p in (self.run_dir / "tables").glob("*")),
        }
        _write_json(self.run_dir / "manifest.json", manifest)
        return manifest


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v) for v in obj]
    return obj


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def run_pipeline(config: PipelineConfig | dict | str | Path, run_dir: str | Path) -> PipelineResult:
    if isinstance(config, (str, Path)):
        config = PipelineConfig.load(config)
    elif isinstance(config, dict):
        config = PipelineConfig.from_dict(config)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    return _Runner(config, run_dir).run()
