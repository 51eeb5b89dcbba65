from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from oracles import embed, pauli_dense, random_unitary, rotation
from protonpipe.circuit import (Circuit, CouplingMap, Gate, canonical_gate, decompose_to_cz, equal_up_to_phase,
                                heavy_hex, kak_decompose, layout_permutation, pauli_evolution, transpile,
                                two_qubit_metrics, two_qubit_to_cz)
from protonpipe.errors import ResourceLimitError, RoutingError, ValidationError
from protonpipe.pauli import PauliString


def circuit_dense(c: Circuit) -> np.ndarray:
    u = np.eye(1 << c.n_qubits, dtype=complex)
    for g in c.gates:
        u = embed(g.unitary(), g.qubits, c.n_qubits) @ u
    return u


def random_circuit(rng, n, depth, two_kinds=("CX", "CZ", "SWAP", "U2")):
    gates = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.5:
            a, b = rng.choice(n, 2, replace=False)
            kind = two_kinds[rng.integers(len(two_kinds))]
            m = random_unitary(rng, 4) if kind == "U2" else None
            gates.append(Gate(kind, (a, b), matrix=m))
        else:
            kind = ["RX", "RY", "RZ", "H", "X", "SX"][rng.integers(6)]
            ang = float(rng.uniform(-np.pi, np.pi)) if kind.startswith("R") else None
            gates.append(Gate(kind, (int(rng.integers(n)),), ang))
    return Circuit(n, gates)


def test_rotation_conventions():
    for kind, letter in (("RX", "X"), ("RY", "Y"), ("RZ", "Z")):
        assert np.allclose(Gate(kind, (0,), 0.37).unitary(), rotation(letter, 0.37))
    assert np.allclose(Gate("RZ", (0,), 0.5).unitary(), np.diag([np.exp(-0.25j), np.exp(0.25j)]))


def test_cx_orientation():
    # control is the first qubit, the most significant bit
    cx = circuit_dense(Circuit(2, [Gate("CX", (0, 1))]))
    assert np.allclose(cx @ np.eye(4)[0b10], np.eye(4)[0b11])


@pytest.mark.parametrize("letters", ["X", "YZ", "ZIX", "XYZY", "IYIX"])
def test_pauli_evolution_matches_matrix_exponential(letters):
    c = pauli_evolution(PauliString(letters), 0.731)
    assert equal_up_to_phase(circuit_dense(c), rotation(letters, 0.731), atol=1e-12)


def test_pauli_evolution_identity_warns():
    with pytest.warns(UserWarning):
        assert len(pauli_evolution(PauliString("II"), 0.3)) == 0


def test_kak_and_cz_synthesis(rng):
    for _ in range(30):
        u = random_unitary(rng, 4)
        phase, (a1, a0), (a, b, c), (b1, b0) = kak_decompose(u)
        recon = phase * np.kron(a1, a0) @ canonical_gate(a, b, c) @ np.kron(b1, b0)
        assert np.allclose(recon, u, atol=1e-10)
        gates = two_qubit_to_cz(u, 0, 1)
        assert sum(g.kind == "CZ" for g in gates) == 3
        assert equal_up_to_phase(circuit_dense(Circuit(2, gates)), u, atol=1e-9)
    # a product of one-qubit gates needs no CZ
    local = np.kron(random_unitary(rng, 2), random_unitary(rng, 2))
    gates = two_qubit_to_cz(local, 0, 1)
    assert not any(g.kind == "CZ" for g in gates)
    assert equal_up_to_phase(circuit_dense(Circuit(2, gates)), local, atol=1e-9)


@pytest.mark.parametrize("kind", ["CX", "SWAP"])
def test_fixed_gate_decompositions(kind):
    g = Gate(kind, (1, 0))
    assert equal_up_to_phase(circuit_dense(Circuit(2, decompose_to_cz(g))), circuit_dense(Circuit(2, [g])))


def _girth(cmap: CouplingMap) -> int:
    best = 10 ** 9
    for s in range(cmap.n_qubits):
        dist, parent = {s: 0}, {s: None}
        q = deque([s])
        while q:
            u = q.popleft()
            for v in cmap.neighbors[u]:
                if v not in dist:
                    dist[v], parent[v] = dist[u] + 1, u
                    q.append(v)
                elif parent[u] != v:
                    best = min(best, dist[u] + dist[v] + 1)
    return best


@pytest.mark.parametrize("d", [1, 2, 3])
def test_heavy_hex_geometry(d):
    cmap = heavy_hex(d)
    deg = [len(nb) for nb in cmap.neighbors]
    assert max(deg) == 3 if d > 1 else max(deg) == 2
    assert cmap.is_connected()
    # heavy: degree-3 qubits only touch degree-2 qubits
    for a, b in cmap.edges:
        assert not (deg[a] == 3 and deg[b] == 3)
    # bipartite, and one independent 12-cycle per hexagonal cell
    color = {0: 0}
    q = deque([0])
    while q:
        u = q.popleft()
        for v in cmap.neighbors[u]:
            if v not in color:
                color[v] = 1 - color[u]
                q.append(v)
            assert color[v] != color[u]
    assert len(cmap.edges) - cmap.n_qubits + 1 == d * d
    assert _girth(cmap) == 12


def test_heavy_hex_patch_and_specs():
    full = CouplingMap.from_spec("heavyhex:2")
    patch = CouplingMap.from_spec("heavyhex:2", 7)
    assert patch.n_qubits == 7 and patch.is_connected()
    assert max(len(nb) for nb in patch.neighbors) <= 3
    assert full.n_qubits == 35
    assert CouplingMap.from_spec("line:4").sorted_edges() == [(0, 1), (1, 2), (2, 3)]
    with pytest.raises(ResourceLimitError):
        full.patch(100)
    with pytest.raises(ValidationError):
        CouplingMap.from_spec("ring:3")


@pytest.mark.parametrize("spec,n", [("line:5", 5), ("heavyhex:2", 5), ("heavyhex:1", 4)])
def test_transpile_preserves_unitary_and_respects_coupling(rng, spec, n):
    cmap = CouplingMap.from_spec(spec, n)
    for _ in range(5):
        c = random_circuit(rng, n, 25)
        out = transpile(c, cmap)
        for g in out.gates:
            assert g.kind in {"CZ", "RX", "RY", "RZ", "H", "X", "SX"}
            if g.is_two_qubit:
                assert cmap.adjacent(*g.qubits)
        perm = layout_permutation(out.meta["final_layout"], n)
        init = layout_permutation(out.meta["initial_layout"], n)
        assert equal_up_to_phase(perm.T @ circuit_dense(out) @ init, circuit_dense(c), atol=1e-8)


def test_transpile_errors():
    c = Circuit(3, [Gate("CZ", (0, 2))])
    disconnected = CouplingMap(3, frozenset({(0, 1)}))
    with pytest.raises(RoutingError):
        transpile(c, disconnected)
    with pytest.raises(ResourceLimitError):
        transpile(Circuit(4), CouplingMap.line(3))


def test_two_qubit_metrics():
    c = Circuit(4, [Gate("CZ", (0, 1)), Gate("CZ", (2, 3)), Gate("H", (1,)), Gate("CZ", (1, 2)),
                    Gate("CZ", (0, 1))])
    assert two_qubit_metrics(c) == (4, 3)


def test_circuit_text_roundtrip_and_inverse(rng, tmp_path):
    c = random_circuit(rng, 3, 30)
    c.save(tmp_path / "c.txt")
    back = Circuit.load(tmp_path / "c.txt")
    assert np.allclose(circuit_dense(back), circuit_dense(c))
    assert equal_up_to_phase(circuit_dense(c.inverse()) @ circuit_dense(c), np.eye(8))


def test_gate_validation():
    with pytest.raises(ValidationError):
        Gate("CZ", (1, 1))
    with pytest.raises(ValidationError):
        Gate("RX", (0,))
    with pytest.raises(ValidationError):
        Gate("U2", (0, 1), matrix=np.ones((4, 4)))
    with pytest.raises(ValidationError):
        Circuit(2, [Gate("H", (2,))])
    assert np.allclose(pauli_dense("X"), Gate("X", (0,)).unitary())
