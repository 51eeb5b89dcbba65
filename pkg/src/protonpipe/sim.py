"""Statevector execution, exact diagonalization and reduced density matrices."""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .errors import DimensionError, ParseError, ResourceLimitError, SectorError, ValidationError
from .fermion import ModeLayout, _ladder, jordan_wigner, number_operator
from .pauli import DENSE_LIMIT, PauliSum, apply_pauli

log = logging.getLogger(__name__)


def apply_matrix(t: np.ndarray, mat: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply ``mat`` to axes ``qubits`` of a ``(2,)*n + extra`` tensor."""
    k = len(qubits)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def apply_gate(t: np.ndarray, gate: Gate) -> np.ndarray:
    return apply_matrix(t, gate.unitary(), gate.qubits)


class StateVector:
    """Unit-norm amplitude vector; basis index bit ``n-1-q`` is qubit ``q``."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, amplitudes, n_qubits: int | None = None, atol: float = 1e-10):
        amps = np.array(amplitudes, dtype=complex).ravel()
        n = int(round(np.log2(len(amps)))) if n_qubits is None else n_qubits
        if len(amps) != 1 << n:
            raise DimensionError(f"{len(amps)} amplitudes do not match {n} qubits")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > atol:
            raise ValidationError(f"state norm {norm:.12f} differs from 1")
        self.n_qubits = n
        self.amplitudes = amps

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps / np.linalg.norm(amps))

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1
        return cls(amps, n_qubits)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "StateVector":
        n = len(bits)
        index = sum(int(b) << (n - 1 - q) for q, b in enumerate(bits))
        return cls.basis(n, index)

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"

    # binary dump: 8-byte little-endian qubit count, then interleaved re/im doubles

    def to_bytes(self) -> bytes:
        body = np.empty(2 * len(self.amplitudes), dtype="<f8")
        body[0::2] = self.amplitudes.real
        body[1::2] = self.amplitudes.imag
        return struct.pack("<Q", self.n_qubits) + body.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "StateVector":
        if len(data) < 8:
            raise ParseError("state file too short")
        (n,) = struct.unpack("<Q", data[:8])
        body = np.frombuffer(data[8:], dtype="<f8")
        if len(body) != 2 << n:
            raise ParseError(f"state file holds {len(body)} doubles, expected {2 << n}")
        return cls(body[0::2] + 1j * body[1::2], n, atol=1e-8)

    def save(self, path: str | Path, metadata: dict | None = None) -> None:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        meta = {"n_qubits": self.n_qubits, "format": "le-u64-header+interleaved-f64"}
        meta.update(metadata or {})
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "StateVector":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True, eq=False)
class DensityOperator:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = 1 << self.n_qubits
        if m.shape != (dim, dim):
            raise DimensionError(f"density matrix shape {m.shape} does not match {self.n_qubits} qubits")
        if abs(np.trace(m) - 1) > 1e-9:
            raise ValidationError(f"density matrix trace {np.trace(m).real:.12f} != 1")
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise ValidationError("density matrix not Hermitian")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityOperator":
        a = psi.amplitudes
        return cls(psi.n_qubits, np.outer(a, a.conj()))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def run(c: Circuit, psi0: StateVector | None = None) -> StateVector:
    """Apply the unitary gates of ``c`` in order; measurements are ignored."""
    if psi0 is None:
        psi0 = StateVector.zero(c.n_qubits)
    if psi0.n_qubits != c.n_qubits:
        raise DimensionError(f"circuit has {c.n_qubits} qubits, state has {psi0.n_qubits}")
    t = psi0.amplitudes.reshape((2,) * c.n_qubits)
    for g in c.gates:
        if g.kind != "MEASURE":
            t = apply_gate(t, g)
    return StateVector(t.ravel(), c.n_qubits)


def expectation(psi: StateVector | np.ndarray, H: PauliSum) -> float:
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    if len(amps) != 1 << H.n_qubits:
        raise DimensionError("state and operator dimensions differ")
    if not H.is_hermitian():
        raise ValidationError("expectation requires a Hermitian operator")
    val = np.vdot(amps, H.to_sparse() @ amps)
    if abs(val.imag) > 1e-10:
        log.warning("expectation value has imaginary residue %.3e", val.imag)
    return float(val.real)


def fidelity(psi: StateVector, phi: StateVector) -> float:
    if psi.n_qubits != phi.n_qubits:
        raise DimensionError("fidelity between states of different size")
    return float(min(1.0, abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2))


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(v) - 1e-12 * np.arange(len(v)))
    return v * (abs(v[k]) / v[k])


def species_counts(layout: ModeLayout) -> tuple[np.ndarray, np.ndarray]:
    """Electron and proton occupation counts of every basis index."""
    n = layout.n_modes
    idx = np.arange(1 << n, dtype=np.int64)
    e_mask = sum(1 << (n - 1 - m) for m in layout.electron_modes)
    p_mask = sum(1 << (n - 1 - m) for m in layout.proton_modes)
    return np.bitwise_count(idx & e_mask), np.bitwise_count(idx & p_mask)


def sector_indices(layout: ModeLayout, n_e: int, n_p: int) -> np.ndarray:
    ne, npr = species_counts(layout)
    return np.flatnonzero((ne == n_e) & (npr == n_p))


def exact_ground_state(H: PauliSum, sector: tuple[int, int] | None = None,
                       layout: ModeLayout | None = None, limit: int = DENSE_LIMIT) -> tuple[float, StateVector]:
    """Lowest eigenpair by dense diagonalization, optionally within the
    ``(N_e, N_p)`` particle-number sector of ``layout``.

    The phase is fixed so the largest-magnitude amplitude is real positive.
    """
    n = H.n_qubits
    if n > limit:
        raise ResourceLimitError(f"{n} qubits exceeds dense limit {limit}")
    mat = H.to_sparse()
    if sector is None:
        idx = np.arange(1 << n)
    else:
        if layout is None:
            layout = ModeLayout(n, 0)
        if layout.n_modes != n:
            raise DimensionError("layout does not match the operator")
        idx = sector_indices(layout, *sector)
        if len(idx) == 0:
            raise SectorError(f"sector {sector} is empty for layout {layout}")
    sub = mat[idx][:, idx].toarray()
    w, v = np.linalg.eigh(sub)
    amps = np.zeros(1 << n, dtype=complex)
    amps[idx] = _fix_phase(v[:, 0])
    return float(w[0]), StateVector(amps, n)


def reduced_density(psi: StateVector, keep: Sequence[int]) -> DensityOperator:
    """Partial trace onto ``keep`` (in ascending qubit order)."""
    keep = sorted(set(int(q) for q in keep))
    n = psi.n_qubits
    if not keep or any(not 0 <= q < n for q in keep):
        raise ValidationError(f"invalid subsystem {keep} for {n} qubits")
    rest = [q for q in range(n) if q not in keep]
    t = psi.amplitudes.reshape((2,) * n).transpose(keep + rest).reshape(1 << len(keep), -1)
    rho = t @ t.conj().T
    return DensityOperator(len(keep), 0.5 * (rho + rho.conj().T))


def orbital_1rdm(psi: StateVector, layout: ModeLayout, species: str) -> np.ndarray:
    """``gamma[P, Q] = <psi| a+_P a_Q |psi>`` over the modes of one species."""
    if layout.n_modes != psi.n_qubits:
        raise DimensionError("layout does not match the state")
    species = {"electron": "e", "proton": "p"}.get(species, species)
    modes = layout.modes(species)
    annihilated = []
    for m in modes:
        op = _ladder(m, False, layout.n_modes)
        annihilated.append(op.apply(psi.amplitudes))
    phi = np.array(annihilated).reshape(len(modes), -1)
    gamma = phi.conj() @ phi.T
    return 0.5 * (gamma + gamma.conj().T)


def number_expectations(psi: StateVector, layout: ModeLayout) -> tuple[float, float]:
    ne = expectation(psi, jordan_wigner(number_operator(layout, "e"), layout).real_part())
    npr = expectation(psi, jordan_wigner(number_operator(layout, "p"), layout).real_part())
    return ne, npr


# Pauli-rotation sequences with adjoint gradients; each rotation is exp(-i a/2 P)


def apply_rotation(psi: np.ndarray, letters: str, angle: float) -> np.ndarray:
    return np.cos(angle / 2) * psi - 1j * np.sin(angle / 2) * apply_pauli(letters, psi)


def rotation_state(psi0: np.ndarray, rotations: Sequence[str], angles: Sequence[float]) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    for letters, a in zip(rotations, angles):
        psi = apply_rotation(psi, letters, a)
    return psi


def energy_and_gradient(H: PauliSum, psi0: np.ndarray, rotations: Sequence[str],
                        angles: Sequence[float]) -> tuple[float, np.ndarray]:
    """Energy of the rotated state and its derivative in each rotation angle."""
    mat = H.to_sparse()
    psi = rotation_state(psi0, rotations, angles)
    lam = mat @ psi
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros(len(rotations))
    for k in range(len(rotations) - 1, -1, -1):
        letters, a = rotations[k], angles[k]
        grad[k] = np.vdot(lam, apply_pauli(letters, psi)).imag
        psi = apply_rotation(psi, letters, -a)
        lam = apply_rotation(lam, letters, -a)
    return energy, grad


def overlap_and_gradient(target: np.ndarray, psi0: np.ndarray, rotations: Sequence[str],
                         angles: Sequence[float]) -> tuple[complex, np.ndarray]:
    """``<target|psi(angles)>`` and its complex derivative per angle."""
    psi = rotation_state(psi0, rotations, angles)
    mu = np.asarray(target, dtype=complex)
    ov = np.vdot(mu, psi)
    grad = np.zeros(len(rotations), dtype=complex)
    for k in range(len(rotations) - 1, -1, -1):
        letters, a = rotations[k], angles[k]
        grad[k] = -0.5j * np.vdot(mu, apply_pauli(letters, psi))
        psi = apply_rotation(psi, letters, -a)
        mu = apply_rotation(mu, letters, -a)
    return ov, grad
