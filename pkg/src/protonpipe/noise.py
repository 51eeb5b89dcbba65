"""Calibration-derived noise models and density-matrix execution.

After every gate the affected qubits see a depolarizing channel and then
thermal relaxation; measurement applies an independent per-qubit readout
confusion.  The depolarizing strength is chosen so that the combined channel
has the calibrated average gate infidelity.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, CouplingMap, Gate
from .errors import ParseError, ResourceLimitError, ValidationError
from .pauli import PauliSum

DENSITY_LIMIT = 10
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_BASIS_CHANGE = {"X": _H, "Y": _H @ np.diag([1, -1j]), "Z": None}


@dataclass(frozen=True)
class QubitCalibration:
    t1: float = math.inf  # seconds
    t2: float = math.inf
    readout_p01: float = 0.0  # P(read 1 | prepared 0)
    readout_p10: float = 0.0  # P(read 0 | prepared 1)

    def confusion(self) -> np.ndarray:
        """``C[measured, true]``."""
        return np.array([[1 - self.readout_p01, self.readout_p10],
                         [self.readout_p01, 1 - self.readout_p10]])


@dataclass(frozen=True)
class GateCalibration:
    kind: str
    qubits: tuple[int, ...]
    error: float
    duration: float  # seconds


def relaxation_factors(t: float, t1: float, t2: float) -> tuple[float, float]:
    """(gamma, off-diagonal decay) of thermal relaxation over time ``t``."""
    gamma = 0.0 if math.isinf(t1) else 1.0 - math.exp(-t / t1)
    decay = 1.0 if math.isinf(t2) else math.exp(-t / t2)
    return gamma, decay


def depolarizing_parameter(error: float, duration: float, qubits: Sequence[QubitCalibration]) -> float:
    """Depolarizing ``p`` such that depolarizing followed by relaxation has
    average gate infidelity ``error``; 0 (with a warning) if relaxation alone
    already exceeds it."""
    d = 2 ** len(qubits)
    f_relax = 1.0
    for q in qubits:
        gamma, decay = relaxation_factors(duration, q.t1, q.t2)
        f_relax *= (2 + 2 * decay - gamma) / 4
    f_target = ((d + 1) * (1 - error) - 1) / d
    p = (f_relax - f_target) / (f_relax - 1 / d ** 2)
    if p < 0:
        warnings.warn(f"relaxation alone exceeds the gate error {error}; depolarizing set to 0", stacklevel=2)
        return 0.0
    return min(p, d ** 2 / (d ** 2 - 1))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    qubits: tuple[QubitCalibration, ...]
    gates: tuple[GateCalibration, ...] = ()
    eplg: float | None = None
    timestamp: str | None = None
    missing: tuple[tuple[int, int], ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "gates", tuple(self.gates))
        for i, q in enumerate(self.qubits):
            if q.t1 <= 0 or q.t2 <= 0:
                raise ValidationError(f"qubit {i}: T1 and T2 must be positive")
            if q.t2 > 2 * q.t1 * (1 + 1e-12):
                raise ValidationError(f"qubit {i}: T2={q.t2:.3e}s exceeds 2*T1={2 * q.t1:.3e}s")
            for name in ("readout_p01", "readout_p10"):
                v = getattr(q, name)
                if not 0 <= v <= 1:
                    raise ValidationError(f"qubit {i}: {name}={v} outside [0, 1]")
        for g in self.gates:
            if not 0 <= g.error <= 1:
                raise ValidationError(f"gate {g.kind}{list(g.qubits)}: error {g.error} outside [0, 1]")
            if g.duration < 0:
                raise ValidationError(f"gate {g.kind}{list(g.qubits)}: negative duration")
            if any(not 0 <= q < len(self.qubits) for q in g.qubits):
                raise ValidationError(f"gate {g.kind}{list(g.qubits)} references an unknown qubit")

    @classmethod
    def ideal(cls, n_qubits: int) -> "NoiseModel":
        return cls(tuple(QubitCalibration() for _ in range(n_qubits)))

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @cached_property
    def _table(self) -> dict:
        table = {}
        for g in self.gates:
            key = (g.kind, tuple(sorted(g.qubits)) if len(g.qubits) == 2 else g.qubits)
            table[key] = g
        return table

    @cached_property
    def _two_qubit_mean(self) -> tuple[float, float]:
        two = [g for g in self.gates if len(g.qubits) == 2]
        if not two:
            return 0.0, 0.0
        return float(np.mean([g.error for g in two])), float(np.mean([g.duration for g in two]))

    def gate_error(self, gate: Gate) -> tuple[float, float]:
        """(error, duration) for a circuit gate, with documented fallbacks."""
        kind = gate.kind.lower()
        if gate.is_two_qubit:
            pair = tuple(sorted(gate.qubits))
            hit = self._table.get((kind, pair))
            if hit is None:
                hit = next((g for (k, q), g in self._table.items() if q == pair), None)
            if hit is None:
                return self._two_qubit_mean
            return hit.error, hit.duration
        hit = self._table.get((kind, gate.qubits))
        if hit is None and kind == "rz":
            return 0.0, 0.0  # virtual Z
        for fallback in ("sx", "x"):
            if hit is None:
                hit = self._table.get((fallback, gate.qubits))
        return (hit.error, hit.duration) if hit else (0.0, 0.0)

    def depolarizing(self, gate: Gate) -> float:
        error, duration = self.gate_error(gate)
        if error == 0.0:
            return 0.0
        return depolarizing_parameter(error, duration, [self.qubits[q] for q in gate.qubits])

    def to_json(self) -> dict:
        def us(v):
            return None if math.isinf(v) else v * 1e6

        return {
            "qubits": [{"t1_us": us(q.t1), "t2_us": us(q.t2), "readout_p01": q.readout_p01,
                        "readout_p10": q.readout_p10} for q in self.qubits],
            "gates": [{"kind": g.kind, "qubits": list(g.qubits), "error": g.error,
                       "duration_ns": g.duration * 1e9} for g in self.gates],
            "eplg18": self.eplg,
            "timestamp": self.timestamp,
        }


def _seconds(value, scale: float) -> float:
    return math.inf if value is None else float(value) * scale


def build_noise_model(source: str | Path | Mapping, coupling: CouplingMap | None = None) -> NoiseModel:
    """Parse a calibration JSON file (or an already-loaded dict).

    Edges of ``coupling`` without a usable two-qubit entry (absent, or with
    a null error) are reported in ``missing`` and fall back to the mean
    two-qubit calibration.
    """
    if isinstance(source, Mapping):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"calibration file is not valid JSON: {exc.msg}", exc.lineno) from None
    try:
        qubits = [QubitCalibration(_seconds(q.get("t1_us"), 1e-6), _seconds(q.get("t2_us"), 1e-6),
                                   float(q.get("readout_p01", 0.0)), float(q.get("readout_p10", 0.0)))
                  for q in data["qubits"]]
        gates, flagged = [], []
        for g in data.get("gates", []):
            qs = tuple(int(q) for q in g["qubits"])
            if g.get("error") is None:
                flagged.append(qs)
                continue
            gates.append(GateCalibration(str(g["kind"]).lower(), qs, float(g["error"]),
                                         float(g.get("duration_ns", 0.0)) * 1e-9))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed calibration data: {exc!r}") from None
    have = {tuple(sorted(g.qubits)) for g in gates if len(g.qubits) == 2}
    missing = {tuple(sorted(q)) for q in flagged if len(q) == 2}
    if coupling is not None:
        missing |= {e for e in coupling.sorted_edges() if e not in have}
    if missing:
        warnings.warn(f"no two-qubit calibration for edges {sorted(missing)}; using the mean", stacklevel=2)
    eplg = data.get("eplg18", data.get("eplg"))
    return NoiseModel(tuple(qubits), tuple(gates), None if eplg is None else float(eplg),
                      data.get("timestamp"), tuple(sorted(missing)))


def synthetic_calibration(coupling: CouplingMap, t1_us: float = 150.0, t2_us: float = 100.0,
                          sx_error: float = 2.5e-4, cz_error: float = 3.108e-3, readout: float = 1e-2,
                          sx_ns: float = 36.0, cz_ns: float = 68.0) -> dict:
    """Uniform device calibration in the JSON layout read by ``build_noise_model``."""
    n = coupling.n_qubits
    gates = [{"kind": "sx", "qubits": [q], "error": sx_error, "duration_ns": sx_ns} for q in range(n)]
    gates += [{"kind": "x", "qubits": [q], "error": sx_error, "duration_ns": sx_ns} for q in range(n)]
    gates += [{"kind": "cz", "qubits": list(e), "error": cz_error, "duration_ns": cz_ns}
              for e in coupling.sorted_edges()]
    return {
        "qubits": [{"t1_us": t1_us, "t2_us": t2_us, "readout_p01": readout, "readout_p10": readout}
                   for _ in range(n)],
        "gates": gates,
        "eplg18": cz_error,
        "timestamp": "synthetic",
    }


# density-matrix evolution on a (2,)*2n tensor: row axes 0..n-1, column axes n..2n-1


def _apply_unitary(rho: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    op = u.reshape((2,) * 2 * k)
    rho = np.tensordot(op, rho, axes=(list(range(k, 2 * k)), list(qubits)))
    rho = np.moveaxis(rho, list(range(k)), list(qubits))
    cols = [n + q for q in qubits]
    rho = np.tensordot(rho, op.conj(), axes=(cols, list(range(k, 2 * k))))
    return np.moveaxis(rho, list(range(2 * n - k, 2 * n)), cols)


def _depolarize(rho: np.ndarray, p: float, qubits: Sequence[int], n: int) -> np.ndarray:
    if p == 0.0:
        return rho
    k = len(qubits)
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    for q in qubits:
        letters[n + q] = letters[q]
    kept = [letters[i] for i in range(2 * n) if (i if i < n else i - n) not in qubits]
    traced = np.einsum("".join(letters) + "->" + "".join(kept), rho)
    eye = np.eye(2 ** k).reshape((2,) * 2 * k)
    mixed = np.multiply.outer(traced, eye) / 2 ** k
    # restore axis order: traced axes first, then the k row and k column axes
    src = list(range(2 * n - 2 * k, 2 * n))
    dst = list(qubits) + [n + q for q in qubits]
    mixed = np.moveaxis(mixed, src, dst)
    return (1 - p) * rho + p * mixed


def _relax(rho: np.ndarray, q: int, gamma: float, decay: float, n: int) -> np.ndarray:
    if gamma == 0.0 and decay == 1.0:
        return rho
    r = np.moveaxis(rho, (q, n + q), (0, 1)).copy()
    r[0, 0] += gamma * r[1, 1]
    r[1, 1] *= 1 - gamma
    r[0, 1] *= decay
    r[1, 0] *= decay
    return np.moveaxis(r, (0, 1), (q, n + q))


def evolve_density(c: Circuit, nm: NoiseModel, limit: int = DENSITY_LIMIT) -> np.ndarray:
    """Noisy final density matrix of ``c`` started from ``|0...0>``."""
    n = c.n_qubits
    if n > limit:
        raise ResourceLimitError(f"{n} qubits exceeds the density-matrix limit {limit}")
    if n > nm.n_qubits:
        raise ValidationError(f"circuit has {n} qubits but the noise model only {nm.n_qubits}")
    rho = np.zeros((2,) * 2 * n, dtype=complex)
    rho[(0,) * 2 * n] = 1.0
    for g in c.gates:
        if g.kind == "MEASURE":
            continue
        rho = _apply_unitary(rho, g.unitary(), g.qubits, n)
        rho = _depolarize(rho, nm.depolarizing(g), g.qubits, n)
        _, duration = nm.gate_error(g)
        if duration > 0:
            for q in g.qubits:
                cal = nm.qubits[q]
                rho = _relax(rho, q, *relaxation_factors(duration, cal.t1, cal.t2), n)
    return rho.reshape(2 ** n, 2 ** n)


def physical_operator(H: PauliSum, c: Circuit) -> PauliSum:
    """Re-index ``H`` from virtual to physical qubits using the circuit's
    ``final_layout`` (identity when absent)."""
    final = c.meta.get("final_layout")
    if final is None:
        if H.n_qubits != c.n_qubits:
            raise ValidationError(f"operator has {H.n_qubits} qubits, circuit {c.n_qubits}")
        return H
    if len(final) != H.n_qubits:
        raise ValidationError("final layout does not match the operator width")
    terms = {}
    for letters, coeff in H.terms.items():
        phys = ["I"] * c.n_qubits
        for v, ch in enumerate(letters):
            phys[final[v]] = ch
        terms["".join(phys)] = coeff
    return PauliSum(c.n_qubits, terms)


def _basis_groups(H: PauliSum) -> dict[str, list[tuple[str, complex]]]:
    groups: dict[str, list[tuple[str, complex]]] = {}
    for letters, coeff in sorted(H.terms.items()):
        if set(letters) <= {"I"}:
            continue
        key = letters.replace("I", "Z")
        groups.setdefault(key, []).append((letters, coeff))
    return groups


def _measured_probabilities(rho: np.ndarray, basis: str, nm: NoiseModel) -> np.ndarray:
    n = len(basis)
    t = rho.reshape((2,) * 2 * n)
    for q, ch in enumerate(basis):
        u = _BASIS_CHANGE[ch]
        if u is not None:
            t = _apply_unitary(t, u, (q,), n)
    probs = np.real(np.diagonal(t.reshape(2 ** n, 2 ** n))).clip(min=0).reshape((2,) * n)
    for q in range(n):
        conf = nm.qubits[q].confusion()
        if not np.array_equal(conf, np.eye(2)):
            probs = np.moveaxis(np.tensordot(conf, probs, axes=([1], [q])), 0, q)
    probs = probs.ravel()
    return probs / probs.sum()


def _parities(letters: str, n: int) -> np.ndarray:
    mask = sum(1 << (n - 1 - q) for q, ch in enumerate(letters) if ch != "I")
    idx = np.arange(2 ** n)
    bits = np.bitwise_and(idx, mask)
    pop = np.zeros(2 ** n, dtype=np.int64)
    while bits.any():
        pop += bits & 1
        bits >>= 1
    return 1 - 2 * (pop % 2)


def noisy_expectation(c: Circuit, H: PauliSum, nm: NoiseModel, shots: int | None = None,
                      rng: np.random.Generator | int | None = None) -> float:
    """Energy of the noisy circuit.

    ``shots=None`` gives the exact value with readout confusion applied
    analytically; otherwise each measurement basis is sampled ``shots``
    times and the per-term sample means are combined.
    """
    if shots is not None and shots <= 0:
        raise ValidationError("shots must be positive")
    if not H.is_hermitian():
        raise ValidationError("observable must be Hermitian")
    Hp = physical_operator(H, c)
    n = c.n_qubits
    rho = evolve_density(c, nm)
    rng = np.random.default_rng(rng)
    energy = Hp.constant().real
    for basis, terms in _basis_groups(Hp).items():
        probs = _measured_probabilities(rho, basis, nm)
        if shots is not None:
            counts = rng.multinomial(shots, probs)
            probs = counts / shots
        for letters, coeff in terms:
            energy += coeff.real * float(probs @ _parities(letters, n))
    return float(energy)
