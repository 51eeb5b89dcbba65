"""Command-line entry point: ``protonpipe <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 resource limit, 4 stage or routing
failure (including partial pipeline runs).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .adapt import adapt_vqe, make_pool
from .aqc import AqcConfig, compile_state
from .circuit import Circuit, CouplingMap, transpile, two_qubit_metrics
from .errors import ProtonPipeError, StageError
from .fermion import ModeLayout
from .hamiltonian import (LmrWeights, assemble, interpolate, parse_integrals, toy_lmr, write_integrals)
from .noise import build_noise_model, noisy_expectation, synthetic_calibration
from .pauli import PauliSum
from .pipeline import run_pipeline
from .sim import StateVector, exact_ground_state, orbital_1rdm, reduced_density, run
from .zne import ZneDataset, barrier_diff_first, barrier_fit_first, collect, fit_extrapolate

log = logging.getLogger("protonpipe")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _layout(text: str) -> ModeLayout:
    ne, npr = _ints(text)
    return ModeLayout(ne, npr)


def _emit(data: dict, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _load_ham(path: str) -> PauliSum:
    return PauliSum.from_text(Path(path).read_text())


def _noise(args, cmap: CouplingMap):
    return build_noise_model(args.calibration if args.calibration else synthetic_calibration(cmap), cmap)


# ham


def cmd_ham_assemble(args) -> int:
    H = assemble(parse_integrals(args.integrals))
    Path(args.out).write_text(H.to_text())
    log.info("wrote %d Pauli terms on %d qubits", len(H), H.n_qubits)
    return 0


def cmd_ham_interpolate(args) -> int:
    hs = [_load_ham(p) for p in (args.left, args.middle, args.right)]
    w = LmrWeights.from_label(args.label) if args.label else LmrWeights.parse(args.weights)
    Path(args.out).write_text(interpolate(*hs, w).to_text())
    return 0


def cmd_ham_toy(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, ints in toy_lmr(args.n_electron, args.n_proton, args.seed, args.scale).items():
        write_integrals(ints, out / f"{name}.txt")
    return 0


# circ


def cmd_circ(args) -> int:
    c = Circuit.load(args.circuit)
    cmap = CouplingMap.from_spec(args.coupling, c.n_qubits)
    routed = transpile(c, cmap)
    if args.out:
        routed.save(args.out)
    count, depth = two_qubit_metrics(routed)
    _emit({"twoq_count": count, "twoq_depth": depth, "n_gates": len(routed)}, None)
    return 0


# exact


def cmd_exact(args) -> int:
    H = _load_ham(args.ham)
    layout = _layout(args.layout)
    sector = tuple(_ints(args.sector)) if args.sector else None
    e, psi = exact_ground_state(H, sector, layout)
    if args.state_out:
        psi.save(args.state_out, {"energy": e})
    _emit({"energy": e}, args.out)
    return 0


# adapt


def cmd_adapt(args) -> int:
    H = _load_ham(args.ham)
    layout = _layout(args.layout)
    occ_e, occ_p = _ints(args.occ_e), _ints(args.occ_p)
    pool = make_pool(layout, occ_e, occ_p, args.pool)
    exact = None
    if args.exact:
        exact, _ = exact_ground_state(H, (len(occ_e), len(occ_p)), layout)
    st, circ = adapt_vqe(H, pool, args.threshold, layout.occupation_mask(occ_e, occ_p), exact,
                         max_iter=args.max_iter, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    st.save(out / "adapt.json")
    circ.save(out / "circuit.txt")
    st.state().save(out / "state.bin", {"energy": st.energy})
    _emit({"energy": st.energy, "exact": exact, "n_generators": len(st.generators), "converged": st.converged,
           "stagnated": st.stagnated}, None)
    if st.stagnated:
        log.warning("ADAPT-VQE stagnated before reaching the threshold")
    return 0


# aqc


def cmd_aqc(args) -> int:
    target = StateVector.load(args.state)
    cmap = CouplingMap.from_spec(args.coupling, target.n_qubits)
    cfg = AqcConfig.preset(args.preset, cmap, block_budget=args.block_budget, seed=args.seed,
                           reoptimize_every=args.reoptimize_every)
    res = compile_state(target, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res.circuit.save(out / "circuit.txt")
    res.save_report(out / "aqc.json")
    count, depth = two_qubit_metrics(transpile(res.circuit, cmap))
    _emit({"fidelity": res.fidelity, "converged": res.converged, "twoq_count": count, "twoq_depth": depth}, None)
    if not res.converged:
        log.warning("fidelity target not reached within %d blocks", cfg.block_budget)
        return StageError.exit_code
    return 0


# noise


def cmd_noise(args) -> int:
    c = Circuit.load(args.circuit)
    H = _load_ham(args.ham)
    cmap = CouplingMap.from_spec(args.coupling, c.n_qubits)
    routed = transpile(c, cmap)
    nm = _noise(args, cmap)
    e = noisy_expectation(routed, H, nm, args.shots, args.seed)
    ideal = noisy_expectation(routed, H, nm.ideal(cmap.n_qubits))
    _emit({"noisy_energy": e, "ideal_energy": ideal, "missing_calibration": list(map(list, nm.missing))}, args.out)
    return 0


# zne


def cmd_zne_collect(args) -> int:
    c = Circuit.load(args.circuit)
    H = _load_ham(args.ham)
    cmap = CouplingMap.from_spec(args.coupling, c.n_qubits)
    routed = transpile(c, cmap)
    data = collect(routed, H, _noise(args, cmap), _floats(args.lambdas), args.replicates, args.shots, args.seed)
    data.save(args.out)
    return 0


def cmd_zne_fit(args) -> int:
    rep = fit_extrapolate(ZneDataset.load(args.data), _ints(args.degrees), seed=args.seed)
    _emit(rep.to_json(), args.out)
    return 0


def cmd_zne_barrier(args) -> int:
    left, middle = ZneDataset.load(args.left), ZneDataset.load(args.middle)
    deg = _ints(args.degrees)
    ff = barrier_fit_first(left, middle, deg, seed=args.seed)
    df = barrier_diff_first(left, middle, deg, seed=args.seed)
    _emit({"fit_first": {"delta": ff.delta, "sigma": ff.sigma},
           "diff_first": {"delta": df.delta, "sigma": df.sigma}}, args.out)
    return 0


# rate / density


def cmd_rate(args) -> int:
    rows = []
    for t in _floats(args.temperatures):
        lin, exact = analysis.rate_sensitivity(args.delta, t)
        rows.append({"temperature": t, "k_ratio": analysis.rate_constant_ratio(args.delta, t),
                     "fractional_change_linear": lin, "fractional_change": exact})
    _emit({"delta_e": args.delta, "rates": rows}, args.out)
    return 0


def cmd_density(args) -> int:
    psi = StateVector.load(args.state)
    layout = _layout(args.layout)
    gamma = orbital_1rdm(psi, layout, "p").real
    if args.grid:
        grid = analysis.OrbitalGrid.from_csv(args.grid)
    else:
        grid = analysis.OrbitalGrid.gaussians([(x, 0.0, 0.0) for x in np.linspace(-1.0, 1.0, layout.n_proton)])
    dens = analysis.proton_density(gamma, grid)
    if args.out:
        Path(args.out).write_text(dens.to_csv(grid))
    s = analysis.entanglement_entropy(reduced_density(psi, list(layout.proton_modes)))
    _emit({"integral": dens.integral, "mean_position": dens.mean_position.tolist(), "entropy": s}, None)
    return 0


def cmd_pipeline(args) -> int:
    res = run_pipeline(args.config, args.run_dir)
    for stage, st in res.manifest["stages"].items():
        log.info("%-12s %s%s", stage, st["status"], f" ({st['reason']})" if "reason" in st else "")
    return 0 if res.ok else StageError.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="protonpipe", description="Nuclear-electronic proton-transfer workflow")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ham = sub.add_parser("ham", help="Hamiltonian construction").add_subparsers(dest="ham_cmd", required=True)
    a = ham.add_parser("assemble", help="integral file -> Pauli Hamiltonian")
    a.add_argument("integrals")
    a.add_argument("-o", "--out", required=True)
    a.set_defaults(func=cmd_ham_assemble)
    a = ham.add_parser("interpolate", help="mix Left/Middle/Right Hamiltonians")
    a.add_argument("left")
    a.add_argument("middle")
    a.add_argument("right")
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--label", help="three-digit path label such as 210")
    g.add_argument("--weights", help="explicit weights, e.g. 0.5,0.5,0")
    a.add_argument("-o", "--out", required=True)
    a.set_defaults(func=cmd_ham_interpolate)
    a = ham.add_parser("toy", help="write a random Left/Middle/Right integral set")
    a.add_argument("--n-electron", type=int, default=2)
    a.add_argument("--n-proton", type=int, default=2)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--scale", type=float, default=1.0)
    a.add_argument("-o", "--out-dir", required=True)
    a.set_defaults(func=cmd_ham_toy)

    a = sub.add_parser("circ", help="route a circuit and report two-qubit metrics")
    a.add_argument("circuit")
    a.add_argument("--coupling", default="heavyhex:2")
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_circ)

    a = sub.add_parser("exact", help="exact ground state in a particle sector")
    a.add_argument("ham")
    a.add_argument("--layout", required=True, help="n_electron_modes,n_proton_modes")
    a.add_argument("--sector", help="n_electrons,n_protons")
    a.add_argument("--state-out")
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_exact)

    a = sub.add_parser("adapt", help="ADAPT-VQE")
    a.add_argument("ham")
    a.add_argument("--layout", required=True)
    a.add_argument("--occ-e", required=True, help="occupied electronic modes, e.g. 0,1")
    a.add_argument("--occ-p", required=True)
    a.add_argument("--threshold", type=float, default=1e-3)
    a.add_argument("--pool", choices=("fermionic", "qubit"), default="fermionic")
    a.add_argument("--exact", action="store_true", help="stop on the energy error against exact diagonalization")
    a.add_argument("--max-iter", type=int, default=200)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("-o", "--out-dir", required=True)
    a.set_defaults(func=cmd_adapt)

    a = sub.add_parser("aqc", help="compile a state with approximate quantum compiling")
    a.add_argument("state")
    a.add_argument("--preset", choices=("high", "low"), default="high")
    a.add_argument("--coupling", default="heavyhex:2")
    a.add_argument("--block-budget", type=int, default=40)
    a.add_argument("--reoptimize-every", type=int, default=5)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("-o", "--out-dir", required=True)
    a.set_defaults(func=cmd_aqc)

    def noise_args(x):
        x.add_argument("circuit")
        x.add_argument("ham")
        x.add_argument("--calibration", help="calibration JSON (default: synthetic device)")
        x.add_argument("--coupling", default="heavyhex:2")
        x.add_argument("--shots", type=int)
        x.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("noise", help="noisy energy of a circuit")
    noise_args(a)
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_noise)

    zne = sub.add_parser("zne", help="zero-noise extrapolation").add_subparsers(dest="zne_cmd", required=True)
    a = zne.add_parser("collect")
    noise_args(a)
    a.add_argument("--lambdas", default="1,2,3,4")
    a.add_argument("--replicates", type=int, default=10)
    a.add_argument("-o", "--out", required=True)
    a.set_defaults(func=cmd_zne_collect)
    a = zne.add_parser("fit")
    a.add_argument("data")
    a.add_argument("--degrees", default="1,2,3")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_zne_fit)
    a = zne.add_parser("barrier")
    a.add_argument("left")
    a.add_argument("middle")
    a.add_argument("--degrees", default="1,2,3")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_zne_barrier)

    a = sub.add_parser("rate", help="relative rate constants from a barrier (Ha)")
    a.add_argument("delta", type=float)
    a.add_argument("--temperatures", default="100,120,200,300")
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_rate)

    a = sub.add_parser("density", help="proton density and proton-electron entanglement entropy")
    a.add_argument("state")
    a.add_argument("--layout", required=True)
    a.add_argument("--grid", help="orbital grid CSV (default: Gaussian stand-ins)")
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_density)

    a = sub.add_parser("pipeline", help="run the full workflow from a JSON config")
    a.add_argument("config")
    a.add_argument("--run-dir", default="run")
    a.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ProtonPipeError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
