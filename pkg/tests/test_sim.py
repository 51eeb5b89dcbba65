from __future__ import annotations

import numpy as np
import pytest

from oracles import embed, one_rdm, partial_trace, random_state, rotation, sum_dense
from protonpipe.circuit import Circuit, Gate
from protonpipe.errors import DimensionError, ParseError, SectorError, ValidationError
from protonpipe.fermion import ModeLayout
from protonpipe.pauli import PauliSum
from protonpipe.sim import (DensityOperator, StateVector, energy_and_gradient, exact_ground_state, expectation,
                            fidelity, number_expectations, orbital_1rdm, overlap_and_gradient, reduced_density,
                            rotation_state, run, sector_indices)


def random_hamiltonian(rng, n, k=8):
    terms = [("".join(rng.choice(list("IXYZ"), n)), float(rng.normal())) for _ in range(k)]
    h = PauliSum(n, terms)
    return h, sum_dense(terms, n)


def test_run_matches_dense_product(rng):
    gates = [Gate("H", (0,)), Gate("CX", (0, 2)), Gate("RY", (1,), 0.4), Gate("CZ", (1, 2)),
             Gate("RZ", (2,), -1.1), Gate("SX", (0,)), Gate("SWAP", (0, 1))]
    c = Circuit(3, gates)
    u = np.eye(8, dtype=complex)
    for g in gates:
        u = embed(g.unitary(), g.qubits, 3) @ u
    psi0 = random_state(rng, 3)
    assert np.allclose(run(c, StateVector(psi0)).amplitudes, u @ psi0)
    assert np.allclose(c.unitary(), u)


def test_expectation_and_fidelity(rng):
    h, dense = random_hamiltonian(rng, 3)
    psi = random_state(rng, 3)
    assert abs(expectation(StateVector(psi), h) - (psi.conj() @ dense @ psi).real) < 1e-12
    phi = random_state(rng, 3)
    assert abs(fidelity(StateVector(psi), StateVector(phi)) - abs(np.vdot(psi, phi)) ** 2) < 1e-12


def test_exact_ground_state_full_and_sector(rng):
    h, dense = random_hamiltonian(rng, 4, 12)
    e, psi = exact_ground_state(h)
    assert abs(e - np.linalg.eigvalsh(dense)[0]) < 1e-12
    layout = ModeLayout(2, 2)
    idx = sector_indices(layout, 1, 1)
    bits = [[(b >> (3 - q)) & 1 for q in range(4)] for b in idx]
    assert all(sum(x[:2]) == 1 and sum(x[2:]) == 1 for x in bits)
    assert len(idx) == 4
    e_s, psi_s = exact_ground_state(h, (1, 1), layout)
    assert abs(e_s - np.linalg.eigvalsh(dense[np.ix_(idx, idx)])[0]) < 1e-12
    outside = np.setdiff1d(np.arange(16), idx)
    assert np.allclose(psi_s.amplitudes[outside], 0)
    with pytest.raises(SectorError):
        exact_ground_state(h, (3, 0), layout)


def test_gradients_match_finite_differences(rng):
    h, _ = random_hamiltonian(rng, 3)
    rots = ["XYI", "IZY", "YYX", "ZIX"]
    ang = rng.uniform(-1, 1, 4)
    psi0 = random_state(rng, 3)
    e, g = energy_and_gradient(h, psi0, rots, ang)
    target = random_state(rng, 3)
    ov, og = overlap_and_gradient(target, psi0, rots, ang)
    eps = 1e-6
    for k in range(4):
        d = np.zeros(4)
        d[k] = eps
        ep, _ = energy_and_gradient(h, psi0, rots, ang + d)
        em, _ = energy_and_gradient(h, psi0, rots, ang - d)
        assert abs((ep - em) / (2 * eps) - g[k]) < 1e-7
        op = np.vdot(target, rotation_state(psi0, rots, ang + d))
        om = np.vdot(target, rotation_state(psi0, rots, ang - d))
        assert abs((op - om) / (2 * eps) - og[k]) < 1e-7
    dense_state = psi0.copy()
    for r, a in zip(rots, ang):
        dense_state = rotation(r, a) @ dense_state
    assert np.allclose(rotation_state(psi0, rots, ang), dense_state)


def test_reduced_density_and_rdm_against_brute_force(rng):
    n = 4
    layout = ModeLayout(2, 2)
    for _ in range(20):
        psi = random_state(rng, n)
        keep = sorted(rng.choice(n, rng.integers(1, n), replace=False).tolist())
        rho = reduced_density(StateVector(psi), keep)
        assert np.allclose(rho.matrix, partial_trace(psi, keep, n), atol=1e-12)
        for species, modes in (("e", [0, 1]), ("p", [2, 3])):
            assert np.allclose(orbital_1rdm(StateVector(psi), layout, species), one_rdm(psi, modes, n), atol=1e-12)


def test_number_expectations():
    layout = ModeLayout(3, 2)
    psi = StateVector.from_bits(layout.occupation_mask([0, 2], [1]))
    assert number_expectations(psi, layout) == pytest.approx((2.0, 1.0))


def test_state_vector_validation_and_io(rng, tmp_path):
    psi = StateVector(random_state(rng, 3))
    psi.save(tmp_path / "s.bin", {"note": "x"})
    back = StateVector.load(tmp_path / "s.bin")
    assert np.array_equal(back.amplitudes, psi.amplitudes)
    assert (tmp_path / "s.bin.json").exists()
    with pytest.raises(ValidationError):
        StateVector(np.ones(4))
    with pytest.raises(DimensionError):
        StateVector(np.ones(3) / np.sqrt(3))
    (tmp_path / "bad.bin").write_bytes(b"\x03\x00\x00\x00\x00\x00\x00\x00" + b"\x00" * 16)
    with pytest.raises(ParseError):
        StateVector.load(tmp_path / "bad.bin")
    assert np.allclose(StateVector.from_bits([0, 1, 1]).amplitudes, np.eye(8)[0b011])


def test_density_operator_validation():
    with pytest.raises(ValidationError):
        DensityOperator(1, np.array([[0.5, 0.0], [0.0, 0.6]]))
    rho = DensityOperator.from_state(StateVector(np.array([1, 1]) / np.sqrt(2)))
    assert rho.purity() == pytest.approx(1.0)
