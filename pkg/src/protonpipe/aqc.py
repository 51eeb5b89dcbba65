"""ADAPT-AQC: compile a target state into a shallow circuit of two-qubit blocks
placed on coupling-map edges."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .circuit import Circuit, CouplingMap, Gate, kak_decompose, zyz_angles
from .errors import ConfigurationError, DimensionError, ValidationError
from .sim import StateVector, overlap_and_gradient, rotation_state, run

log = logging.getLogger(__name__)

N_BLOCK_PARAMS = 15
PRESETS = {"high": 0.99, "low": 0.97}
TIE_TOL = 1e-10

# rotation layout of one block, time order: local ZYZ on both qubits,
# XX/YY/ZZ interaction, local ZYZ on both qubits
_BLOCK_LETTERS = ("ZI", "YI", "ZI", "IZ", "IY", "IZ", "XX", "YY", "ZZ",
                  "ZI", "YI", "ZI", "IZ", "IY", "IZ")


@dataclass(frozen=True)
class AqcConfig:
    fidelity_target: float
    coupling: CouplingMap
    block_budget: int = 40
    strategy: str = "greedy-probe"
    seed: int = 0
    reoptimize_every: int = 5
    max_evals: int = 3000
    restarts: int = 3

    def __post_init__(self):
        if not 0 < self.fidelity_target <= 1:
            raise ValidationError(f"fidelity target must lie in (0, 1], got {self.fidelity_target}")
        if self.block_budget < 0 or self.reoptimize_every < 1:
            raise ValidationError("block budget must be >= 0 and reoptimize_every >= 1")
        if self.strategy != "greedy-probe":
            raise ConfigurationError(f"unknown pair-selection strategy {self.strategy!r}")

    @classmethod
    def preset(cls, name: str, coupling: CouplingMap, **kw) -> "AqcConfig":
        if name not in PRESETS:
            raise ConfigurationError(f"unknown AQC preset {name!r}; expected one of {sorted(PRESETS)}")
        return cls(PRESETS[name], coupling, **kw)


@dataclass
class AqcResult:
    circuit: Circuit
    cost: float
    cost_history: list[float]
    pairs: list[tuple[int, int]]
    params: np.ndarray
    converged: bool
    notes: list[str] = field(default_factory=list)

    @property
    def fidelity(self) -> float:
        return 1.0 - self.cost

    def report(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "cost": self.cost,
            "cost_history": self.cost_history,
            "pairs": [list(p) for p in self.pairs],
            "n_blocks": len(self.pairs),
            "converged": self.converged,
            "notes": self.notes,
        }

    def save_report(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.report(), indent=2) + "\n")


def _place(letters2: str, pair: tuple[int, int], n: int) -> str:
    out = ["I"] * n
    out[pair[0]], out[pair[1]] = letters2[0], letters2[1]
    return "".join(out)


def skeleton_rotations(pairs: Sequence[tuple[int, int]], n: int) -> list[str]:
    return [_place(l, p, n) for p in pairs for l in _BLOCK_LETTERS]


def block_unitary(params: Sequence[float]) -> np.ndarray:
    """4x4 unitary of one block; the first pair qubit is the more significant."""
    cols = [rotation_state(np.eye(4)[:, j], _BLOCK_LETTERS, params) for j in range(4)]
    return np.column_stack(cols)


def block_params(u: np.ndarray) -> np.ndarray:
    """Block angles reproducing ``u`` up to global phase."""
    _, (a1, a0), (ca, cb, cc), (b1, b0) = kak_decompose(u)
    out = []
    for v in (b1, b0):
        alpha, beta, gamma = zyz_angles(v)
        out += [gamma, beta, alpha]
    # exp(i a XX) = exp(-i (-2a)/2 XX)
    out += [-2 * ca, -2 * cb, -2 * cc]
    for v in (a1, a0):
        alpha, beta, gamma = zyz_angles(v)
        out += [gamma, beta, alpha]
    return np.array(out)


def _pair_matrix(psi: np.ndarray, pair: tuple[int, int], n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    rest = [q for q in range(n) if q not in pair]
    return t.transpose(list(pair) + rest).reshape(4, -1)


def probe_pair(current: np.ndarray, target: np.ndarray, pair: tuple[int, int], n: int):
    """Best single block on ``pair``: returns (fidelity gain, optimal 4x4 unitary).

    With ``K = Tr_rest |current><target|`` the overlap after a block ``U`` is
    ``Tr(U K)``, maximised in modulus by the polar factor of ``K``; the best
    fidelity is the squared nuclear norm of ``K``.
    """
    k = _pair_matrix(current, pair, n) @ _pair_matrix(target, pair, n).conj().T
    w, s, vh = np.linalg.svd(k)
    u = vh.conj().T @ w.conj().T
    base = abs(np.vdot(target, current)) ** 2
    return float(s.sum() ** 2 - base), u


@dataclass(frozen=True)
class PairChoice:
    pair: tuple[int, int]
    score: float
    unitary: np.ndarray
    zero_score: bool


def select_pair(current: StateVector | np.ndarray, target: StateVector | np.ndarray,
                coupling: CouplingMap) -> PairChoice:
    cur = current.amplitudes if isinstance(current, StateVector) else np.asarray(current)
    tgt = target.amplitudes if isinstance(target, StateVector) else np.asarray(target)
    edges = coupling.sorted_edges()
    if not edges:
        raise ConfigurationError("coupling map has no edges")
    n = int(np.log2(len(cur)))
    best = None
    for e in edges:
        if max(e) >= n:
            continue
        score, u = probe_pair(cur, tgt, e, n)
        if best is None or score > best[1] + TIE_TOL:
            best = (e, score, u)
    if best is None:
        raise ConfigurationError("no coupling-map edge lies inside the register")
    pair, score, u = best
    return PairChoice(pair, score, u, score <= TIE_TOL)


def _start_state(n: int, start: Sequence[int] | None) -> np.ndarray:
    bits = [0] * n if start is None else list(start)
    return StateVector.from_bits(bits).amplitudes


def cost_and_gradient(target: np.ndarray, pairs: Sequence[tuple[int, int]], params: np.ndarray,
                      n: int, start: Sequence[int] | None = None) -> tuple[float, np.ndarray]:
    """``C = 1 - |<target|V(params)|start>|^2`` and ``dC/dparams`` (shape like params)."""
    ov, d_ov = overlap_and_gradient(target, _start_state(n, start), skeleton_rotations(pairs, n),
                                    params.ravel())
    grad = -2.0 * (np.conj(ov) * d_ov).real
    return 1.0 - abs(ov) ** 2, grad.reshape(params.shape)


@dataclass
class BlockOptimum:
    params: np.ndarray
    cost: float
    converged: bool
    n_evals: int


def optimize_blocks(pairs: Sequence[tuple[int, int]], target: StateVector | np.ndarray,
                    params: np.ndarray | None = None, active: Sequence[int] | None = None,
                    max_evals: int = 3000, tol: float = 1e-10,
                    start: Sequence[int] | None = None) -> BlockOptimum:
    """Minimise the infidelity over the parameters of the ``active`` blocks
    (default: all). Never returns a point worse than the entry point."""
    if not pairs:
        raise ValidationError("empty circuit skeleton")
    tgt = target.amplitudes if isinstance(target, StateVector) else np.asarray(target, dtype=complex)
    n = int(np.log2(len(tgt)))
    params = np.zeros((len(pairs), N_BLOCK_PARAMS)) if params is None else np.array(params, dtype=float)
    if params.shape != (len(pairs), N_BLOCK_PARAMS):
        raise DimensionError(f"params shape {params.shape} does not match {len(pairs)} blocks")
    active = list(range(len(pairs))) if active is None else sorted(set(active))
    evals = 0

    def fun(x):
        nonlocal evals
        evals += 1
        p = params.copy()
        p[active] = x.reshape(len(active), N_BLOCK_PARAMS)
        c, g = cost_and_gradient(tgt, pairs, p, n, start)
        return c, g[active].ravel()

    x0 = params[active].ravel()
    c0, _ = fun(x0)
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxfun": max_evals, "maxiter": max_evals, "ftol": 1e-15, "gtol": tol})
    out = params.copy()
    if res.fun <= c0:
        out[active] = res.x.reshape(len(active), N_BLOCK_PARAMS)
        cost = float(res.fun)
    else:
        cost = float(c0)
    return BlockOptimum(out, cost, bool(res.success), evals)


def blocks_to_circuit(pairs: Sequence[tuple[int, int]], params: np.ndarray, n: int,
                      start: Sequence[int] | None = None) -> Circuit:
    gates = [Gate("X", (q,)) for q, b in enumerate(start or []) if b]
    gates += [Gate("U2", tuple(p), matrix=block_unitary(th)) for p, th in zip(pairs, params)]
    return Circuit(n, gates, {"source": "aqc"})


def dominant_bits(target: np.ndarray, n: int) -> list[int]:
    """Bits of the largest-weight basis state (lowest index on ties)."""
    k = int(np.argmax(np.round(np.abs(target) ** 2, 12)))
    return [(k >> (n - 1 - q)) & 1 for q in range(n)]


def edge_chains(cmap: CouplingMap, length: int) -> list[tuple[tuple[int, int], ...]]:
    """Sequences of ``length`` distinct edges, each sharing a qubit with the next."""
    edges = cmap.sorted_edges()
    chains = [(e,) for e in edges]
    for _ in range(length - 1):
        chains = [c + (e,) for c in chains for e in edges if e not in c and set(e) & set(c[-1])]
    return chains


def _lookahead(pairs, params, tgt, cmap, start, rng, cfg, max_length: int = 3, kick: float = 0.3):
    """Fallback when every one-block probe is zero.

    Tries short chains of new blocks started near the identity (seeded
    kicks) with all blocks free, then seeded perturbations of the whole
    circuit; the first candidate that lowers the cost wins.
    """
    n = len(start)
    base = 1.0 - abs(np.vdot(tgt, run(blocks_to_circuit(pairs, params, n, start)).amplitudes)) ** 2

    def opt(skel, prm):
        return optimize_blocks(skel, tgt, prm, max_evals=cfg.max_evals, start=start)

    for length in range(2, max_length + 1):
        if len(pairs) + length > cfg.block_budget:
            break
        best = None
        for chain in edge_chains(cmap, length):
            trial = np.vstack([params, kick * rng.standard_normal((length, N_BLOCK_PARAMS))])
            res = opt(pairs + list(chain), trial)
            if best is None or res.cost < best[2] - TIE_TOL:
                best = (list(chain), res.params, res.cost)
        if best is not None and best[2] < base - 1e-9:
            return best[0], best[1]
    if pairs:
        for _ in range(cfg.restarts):
            res = opt(pairs, params + kick * rng.standard_normal(params.shape))
            if res.cost < base - 1e-9:
                return [], res.params
    return None


def compile_state(target: StateVector, cfg: AqcConfig) -> AqcResult:
    """Grow blocks greedily until ``1 - fidelity <= 1 - cfg.fidelity_target``
    or the block budget runs out (then ``converged`` is False).

    The register is first flipped into the target's dominant basis state
    with free one-qubit X gates; blocks are then added on the coupled pair
    with the best one-block probe.
    """
    if not isinstance(target, StateVector):
        target = StateVector(np.asarray(target))
    n = target.n_qubits
    tgt = target.amplitudes
    if cfg.coupling.n_qubits < n:
        raise ValidationError(f"coupling map has {cfg.coupling.n_qubits} qubits, target needs {n}")
    cmap = cfg.coupling.subgraph(range(n)) if cfg.coupling.n_qubits > n else cfg.coupling
    goal = 1.0 - cfg.fidelity_target
    start = dominant_bits(tgt, n)
    rng = np.random.default_rng(cfg.seed)
    pairs: list[tuple[int, int]] = []
    params = np.zeros((0, N_BLOCK_PARAMS))

    def optimize(p, prm, active=None):
        return optimize_blocks(p, tgt, prm, active=active, max_evals=cfg.max_evals, start=start)

    cost = 1.0 - abs(np.vdot(tgt, _start_state(n, start))) ** 2
    history = [cost]
    notes: list[str] = []
    converged = cost <= goal
    inc = 0
    while not converged and inc < cfg.block_budget:
        inc += 1
        psi = run(blocks_to_circuit(pairs, params, n, start)).amplitudes
        choice = select_pair(psi, tgt, cmap)
        if choice.zero_score:
            found = _lookahead(pairs, params, tgt, cmap, start, rng, cfg)
            if found is None:
                notes.append(f"increment {inc}: no block chain improves the fidelity; stopping")
                break
            chain, params = found
            pairs.extend(chain)
            inc += max(len(chain) - 1, 0)
            opt = optimize(pairs, params)
            params, cost = opt.params, opt.cost
            notes.append(f"increment {inc}: probe scores vanished; added chain {chain}")
            history.append(cost)
            converged = cost <= goal
            continue
        pairs.append(choice.pair)
        # start the new block at the probe optimum: never worse than identity
        params = np.vstack([params, block_params(choice.unitary)])
        full = inc % cfg.reoptimize_every == 0
        opt = optimize(pairs, params, None if full else [len(pairs) - 1])
        params, cost = opt.params, min(opt.cost, cost)
        history.append(cost)
        log.info("AQC increment %d: pair %s, C=%.3e%s", inc, choice.pair, cost, " (full)" if full else "")
        converged = cost <= goal
    if not converged and pairs:
        opt = optimize(pairs, params)
        if opt.cost < cost:
            params, cost = opt.params, opt.cost
            history.append(cost)
        converged = cost <= goal
        if not converged:
            notes.append("block budget exhausted before reaching the fidelity target")
    circuit = blocks_to_circuit(pairs, params, n, start)
    # report the independently simulated infidelity
    final = 1.0 - abs(np.vdot(tgt, run(circuit).amplitudes)) ** 2
    circuit.meta.update({"fidelity": 1.0 - final, "n_blocks": len(pairs)})
    return AqcResult(circuit, float(final), history, pairs, params, bool(final <= goal + 1e-12), notes)
