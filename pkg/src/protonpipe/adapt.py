"""ADAPT-VQE: grow an ansatz one pool generator at a time."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .circuit import Circuit, Gate, pauli_evolution
from .errors import ConfigurationError, ValidationError
from .fermion import ModeLayout, excitation_pool, jordan_wigner, qubit_pool
from .pauli import PauliString, PauliSum
from .sim import StateVector, energy_and_gradient, expectation, rotation_state

log = logging.getLogger(__name__)

GRADIENT_FLOOR = 1e-6
MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class Generator:
    """Anti-Hermitian generator ``tau`` whose Pauli terms mutually commute,
    so ``exp(theta tau)`` is an exact product of Pauli rotations."""

    label: str
    op: PauliSum
    rotations: tuple[str, ...] = field(init=False)
    multipliers: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if not self.op.is_anti_hermitian():
            raise ValidationError(f"generator {self.label} is not anti-Hermitian")
        letters = sorted(self.op.terms)
        strings = [PauliString(p) for p in letters]
        for i, a in enumerate(strings):
            for b in strings[i + 1:]:
                if not a.commutes(b):
                    raise ValidationError(f"generator {self.label} has non-commuting terms")
        # exp(theta * i r P) = exp(-i (-2 r theta)/2 P)
        object.__setattr__(self, "rotations", tuple(letters))
        object.__setattr__(self, "multipliers", tuple(-2.0 * self.op.terms[p].imag for p in letters))

    @classmethod
    def from_pauli(cls, p: PauliString) -> "Generator":
        return cls(p.letters, p.to_sum(1j))

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.op.apply(psi)


def make_pool(layout: ModeLayout, occupied_e: Sequence[int], occupied_p: Sequence[int],
              kind: str = "fermionic") -> list[Generator]:
    ferm = excitation_pool(layout, occupied_e, occupied_p)
    mapped = [jordan_wigner(op, layout) for op in ferm]
    if kind == "fermionic":
        return [Generator(op.label, m) for op, m in zip(ferm, mapped)]
    if kind == "qubit":
        return [Generator.from_pauli(p) for p in qubit_pool(mapped)]
    raise ConfigurationError(f"unknown pool kind {kind!r}")


def _expand(generators: Sequence[Generator], theta: np.ndarray):
    rotations, angles, mult = [], [], []
    for g, t in zip(generators, theta):
        for p, m in zip(g.rotations, g.multipliers):
            rotations.append(p)
            angles.append(m * t)
            mult.append(m)
    return rotations, np.array(angles), mult


def _owners(generators: Sequence[Generator]) -> np.ndarray:
    return np.concatenate([np.full(len(g.rotations), k) for k, g in enumerate(generators)]) \
        if generators else np.zeros(0, dtype=int)


def prepare(generators: Sequence[Generator], theta: Sequence[float], psi0: np.ndarray) -> np.ndarray:
    rotations, angles, _ = _expand(generators, np.asarray(theta, dtype=float))
    return rotation_state(psi0, rotations, angles)


def energy_gradient(H: PauliSum, generators: Sequence[Generator], theta: np.ndarray,
                    psi0: np.ndarray) -> tuple[float, np.ndarray]:
    rotations, angles, mult = _expand(generators, np.asarray(theta, dtype=float))
    energy, grad_rot = energy_and_gradient(H, psi0, rotations, angles)
    grad = np.zeros(len(generators))
    np.add.at(grad, _owners(generators), np.asarray(mult) * grad_rot)
    return energy, grad


def gradient_screen(H: PauliSum, psi: StateVector | np.ndarray, pool: Sequence[Generator]) -> np.ndarray:
    """``|<psi|[H, tau]|psi>|`` for every pool element, in pool order."""
    if not pool:
        raise ConfigurationError("empty operator pool")
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    h_psi = H.to_sparse() @ amps
    return np.array([abs(2.0 * np.vdot(h_psi, g.apply(amps)).real) for g in pool])


@dataclass
class OptimizeResult:
    theta: np.ndarray
    energy: float
    converged: bool
    n_evals: int
    grad_norm: float


def optimize_parameters(H: PauliSum, generators: Sequence[Generator], theta_init: Sequence[float],
                        psi0: np.ndarray, tol: float = 1e-8, max_evals: int = 2000,
                        seed: int = 0, restarts: int = 2) -> OptimizeResult:
    """BFGS with adjoint gradients; on stagnation, retry from small seeded
    perturbations and keep the best point found."""
    if not generators:
        raise ConfigurationError("no generators to optimize")
    theta0 = np.asarray(theta_init, dtype=float)
    n_evals = 0

    def fun(t):
        nonlocal n_evals
        n_evals += 1
        return energy_gradient(H, generators, t, psi0)

    e0, g0 = fun(theta0)
    best = OptimizeResult(theta0, e0, bool(np.linalg.norm(g0) < tol), 1, float(np.linalg.norm(g0)))
    if best.converged:
        return best
    rng = np.random.default_rng(seed)
    start = theta0
    for attempt in range(restarts + 1):
        budget = max_evals - n_evals
        if budget <= 0:
            break
        res = minimize(fun, start, jac=True, method="BFGS",
                       options={"gtol": tol, "maxiter": budget})
        e, g = energy_gradient(H, generators, res.x, psi0)
        gn = float(np.linalg.norm(g))
        if e < best.energy - 1e-14 or (e <= best.energy + 1e-14 and gn < best.grad_norm):
            best = OptimizeResult(res.x, e, gn < tol, n_evals, gn)
        # BFGS often stops on precision loss just above gtol; accept that
        if gn < max(tol, 1e-6):
            best.converged = True
            break
        start = best.theta + 1e-2 * rng.standard_normal(len(theta0))
    best.n_evals = n_evals
    return best


@dataclass
class AdaptState:
    generators: list[Generator]
    theta: np.ndarray
    energies: list[float]
    reference: list[int]
    max_gradients: list[float] = field(default_factory=list)
    converged: bool = False
    stagnated: bool = False

    @property
    def energy(self) -> float:
        return self.energies[-1]

    def state(self) -> StateVector:
        psi0 = StateVector.from_bits(self.reference).amplitudes
        return StateVector(prepare(self.generators, self.theta, psi0), len(self.reference))

    def to_json(self) -> dict:
        return {
            "reference": list(self.reference),
            "generators": [{"label": g.label, "op": g.op.to_text()} for g in self.generators],
            "theta": [repr(float(t)) for t in self.theta],
            "energies": list(map(float, self.energies)),
            "max_gradients": list(map(float, self.max_gradients)),
            "converged": self.converged,
            "stagnated": self.stagnated,
        }

    @classmethod
    def from_json(cls, data: dict) -> "AdaptState":
        n = len(data["reference"])
        gens = [Generator(g["label"], PauliSum.from_text(g["op"], n)) for g in data["generators"]]
        return cls(gens, np.array([float(t) for t in data["theta"]]), list(data["energies"]),
                   list(data["reference"]), list(data.get("max_gradients", [])),
                   data.get("converged", False), data.get("stagnated", False))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AdaptState":
        return cls.from_json(json.loads(Path(path).read_text()))


def ansatz_circuit(state: AdaptState) -> Circuit:
    """Reference preparation followed by one Pauli rotation per generator term."""
    n = len(state.reference)
    c = Circuit(n, [Gate("X", (q,)) for q, b in enumerate(state.reference) if b])
    for g, t in zip(state.generators, state.theta):
        for p, m in zip(g.rotations, g.multipliers):
            c = c + pauli_evolution(PauliString(p), m * t)
    return c


def adapt_vqe(H: PauliSum, pool: Sequence[Generator], threshold: float, reference: Sequence[int],
              exact_energy: float | None = None, gradient_floor: float = GRADIENT_FLOOR,
              max_iter: int = MAX_ITER, seed: int = 0, opt_tol: float = 1e-8) -> tuple[AdaptState, Circuit]:
    """Iterate screen -> select -> append -> re-optimize.

    Stops when ``E - exact_energy < threshold`` (if an exact energy is
    supplied) or when the largest pool gradient drops below
    ``gradient_floor``; in the latter case with an exact energy still out of
    reach the result is flagged ``stagnated``.
    """
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    reference = [int(b) for b in reference]
    if len(reference) != H.n_qubits:
        raise ValidationError("reference bitstring length must match the Hamiltonian")
    psi0 = StateVector.from_bits(reference).amplitudes
    energy = expectation(psi0, H)
    st = AdaptState([], np.zeros(0), [energy], reference)
    for it in range(max_iter + 1):
        if exact_energy is not None and energy - exact_energy < threshold:
            st.converged = True
            break
        if it == max_iter:
            break
        psi = prepare(st.generators, st.theta, psi0)
        grads = gradient_screen(H, psi, pool)
        k = int(np.argmax(grads))
        st.max_gradients.append(float(grads[k]))
        if grads[k] < gradient_floor:
            if exact_energy is None:
                st.converged = True
            else:
                st.stagnated = True
            break
        st.generators.append(pool[k])
        res = optimize_parameters(H, st.generators, np.append(st.theta, 0.0), psi0, tol=opt_tol, seed=seed + it)
        if res.energy > energy + 1e-9:
            raise ValidationError("optimizer increased the energy")  # cannot happen from a warm start
        st.theta = res.theta
        energy = min(res.energy, energy)
        st.energies.append(energy)
        log.info("ADAPT iter %d: %s  E=%.10f  |g|max=%.2e", it + 1, pool[k].label, energy, grads[k])
    return st, ansatz_circuit(st)
