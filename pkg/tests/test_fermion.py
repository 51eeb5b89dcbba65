from __future__ import annotations

import itertools
import warnings

import numpy as np
import pytest

from oracles import fock_ladder, fock_product, number_dense
from protonpipe.errors import ConfigurationError
from protonpipe.fermion import (FermionTerm, ModeLayout, excitation, excitation_pool, jordan_wigner,
                                number_operator, qubit_pool)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ladder_operators_match_fock_space(n):
    layout = ModeLayout(n)
    for j in range(n):
        for creation in (True, False):
            jw = jordan_wigner(FermionTerm(1.0, ((j, creation),)), layout).to_dense()
            assert np.allclose(jw, fock_ladder(j, n, creation), atol=1e-14)


def test_canonical_anticommutation():
    n = 4
    layout = ModeLayout(n)
    a = [jordan_wigner(FermionTerm(1.0, ((j, False),)), layout).to_dense() for j in range(n)]
    for i, j in itertools.product(range(n), repeat=2):
        anti = a[i] @ a[j].conj().T + a[j].conj().T @ a[i]
        assert np.allclose(anti, np.eye(16) * (i == j))
        assert np.allclose(a[i] @ a[j] + a[j] @ a[i], 0)


def test_all_one_and_two_body_terms_on_four_modes():
    n = 4
    layout = ModeLayout(2, 2)
    ops = [((p, True), (q, False)) for p, q in itertools.product(range(n), repeat=2)]
    ops += [((p, True), (q, True), (r, False), (s, False))
            for p, q, r, s in itertools.product(range(n), repeat=4)]
    for term in ops:
        jw = jordan_wigner(FermionTerm(1.0, term), layout).to_dense()
        assert np.allclose(jw, fock_product(term, n), atol=1e-12)


def test_number_operators():
    layout = ModeLayout(3, 2)
    ne = jordan_wigner(number_operator(layout, "e"), layout).to_dense()
    npr = jordan_wigner(number_operator(layout, "p"), layout).to_dense()
    assert np.allclose(ne, number_dense(range(3), 5))
    assert np.allclose(npr, number_dense(range(3, 5), 5))


def test_layout_and_occupation_mask():
    layout = ModeLayout(3, 2)
    assert layout.n_modes == 5
    assert list(layout.proton_modes) == [3, 4]
    assert layout.occupation_mask([0, 2], [1]) == [1, 0, 1, 0, 1]
    with pytest.raises(ConfigurationError):
        ModeLayout(-1, 0)


def test_pool_elements_are_anti_hermitian_and_conserve_species_numbers():
    layout = ModeLayout(3, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pool = excitation_pool(layout, [0], [0])
    ne = jordan_wigner(number_operator(layout, "e"), layout)
    npr = jordan_wigner(number_operator(layout, "p"), layout)
    labels = {op.label.split(":")[0] for op in pool}
    assert labels == {"e1", "p1", "ep"}
    for op in pool:
        tau = jordan_wigner(op, layout)
        assert tau.is_anti_hermitian()
        assert len(tau.commutator(ne)) == 0
        assert len(tau.commutator(npr)) == 0
    # singles: 2 electronic + 2 protonic, mixed doubles: 2 * 2
    assert len(pool) == 8


def test_empty_blocks_warn_and_empty_pool_raises():
    layout = ModeLayout(2, 2)
    with pytest.warns(UserWarning, match="e2"):
        excitation_pool(layout, [0], [0])
    with pytest.raises(ConfigurationError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            excitation_pool(ModeLayout(1, 1), [0], [0])
    with pytest.raises(ConfigurationError):
        excitation_pool(layout, [5], [0])


def test_qubit_pool_strings_have_odd_y_count():
    layout = ModeLayout(2, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mapped = [jordan_wigner(op, layout) for op in excitation_pool(layout, [0], [0])]
    strings = qubit_pool(mapped)
    assert strings
    assert all(s.letters.count("Y") % 2 == 1 for s in strings)
    assert len({s.letters for s in strings}) == len(strings)


def test_excitation_ordering():
    # a+_1 a_0 moves the particle from mode 0 to mode 1
    layout = ModeLayout(2)
    m = jordan_wigner(excitation([1], [0]), layout).to_dense()
    src = np.zeros(4)
    src[0b10] = 1
    assert np.allclose(m @ src, np.eye(4)[0b01])
