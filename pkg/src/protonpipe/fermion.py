"""Two-species second-quantized operators and their Jordan-Wigner images.

Electron modes come first in the global ordering, proton modes after them;
the qubit index of a mode equals its global index.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ConfigurationError, DimensionError
from .pauli import PauliString, PauliSum


@dataclass(frozen=True)
class ModeLayout:
    n_electron: int
    n_proton: int = 0

    def __post_init__(self):
        if self.n_electron < 0 or self.n_proton < 0:
            raise ConfigurationError("mode counts must be non-negative")

    @property
    def n_modes(self) -> int:
        return self.n_electron + self.n_proton

    @property
    def electron_modes(self) -> range:
        return range(self.n_electron)

    @property
    def proton_modes(self) -> range:
        return range(self.n_electron, self.n_modes)

    def species(self, mode: int) -> str:
        self.check(mode)
        return "e" if mode < self.n_electron else "p"

    def proton(self, local: int) -> int:
        """Global index of protonic mode ``local``."""
        if not 0 <= local < self.n_proton:
            raise DimensionError(f"proton mode {local} out of range")
        return self.n_electron + local

    def check(self, mode: int) -> None:
        if not 0 <= mode < self.n_modes:
            raise DimensionError(f"mode {mode} out of range for {self.n_modes} modes")

    def modes(self, species: str) -> range:
        return self.electron_modes if species == "e" else self.proton_modes

    def occupation_mask(self, occupied_e: Iterable[int], occupied_p: Iterable[int]) -> list[int]:
        bits = [0] * self.n_modes
        for i in occupied_e:
            bits[i] = 1
        for i in occupied_p:
            bits[self.proton(i)] = 1
        return bits


@dataclass(frozen=True)
class FermionTerm:
    """``coefficient * op_1 op_2 ...`` with ops as ``(mode, is_creation)`` pairs."""

    coefficient: complex
    ops: tuple[tuple[int, bool], ...]

    def dagger(self) -> "FermionTerm":
        return FermionTerm(complex(self.coefficient).conjugate(),
                           tuple((m, not c) for m, c in reversed(self.ops)))


@dataclass(frozen=True)
class FermionOperator:
    terms: tuple[FermionTerm, ...]
    label: str = field(default="", compare=False)

    @classmethod
    def term(cls, coefficient: complex, *ops: tuple[int, bool], label: str = "") -> "FermionOperator":
        return cls((FermionTerm(coefficient, tuple(ops)),), label)

    def dagger(self) -> "FermionOperator":
        return FermionOperator(tuple(t.dagger() for t in self.terms), self.label)

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        return FermionOperator(self.terms + other.terms, self.label or other.label)

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        neg = tuple(FermionTerm(-t.coefficient, t.ops) for t in other.terms)
        return FermionOperator(self.terms + neg, self.label or other.label)


def excitation(creations: Sequence[int], annihilations: Sequence[int], coefficient: complex = 1.0,
               label: str = "") -> FermionOperator:
    """``coefficient * a+_c1 a+_c2 ... a_a1 a_a2 ...``."""
    ops = tuple((m, True) for m in creations) + tuple((m, False) for m in annihilations)
    return FermionOperator((FermionTerm(coefficient, ops),), label)


def number_operator(layout: ModeLayout, species: str) -> FermionOperator:
    terms = tuple(FermionTerm(1.0, ((m, True), (m, False))) for m in layout.modes(species))
    return FermionOperator(terms, f"N_{species}")


@lru_cache(maxsize=4096)
def _ladder(mode: int, creation: bool, n_modes: int) -> PauliSum:
    z = {k: "Z" for k in range(mode)}
    x = PauliSum.from_ops(n_modes, {**z, mode: "X"}, 0.5)
    y = PauliSum.from_ops(n_modes, {**z, mode: "Y"}, -0.5j if creation else 0.5j)
    return x + y


def jordan_wigner(op: FermionOperator | FermionTerm, layout: ModeLayout) -> PauliSum:
    """Map ``a_j -> (X_j + iY_j)/2 * Z_0 ... Z_{j-1}``."""
    n = layout.n_modes
    terms = (op,) if isinstance(op, FermionTerm) else op.terms
    out = PauliSum.zero(n)
    for term in terms:
        prod = PauliSum.identity(n, term.coefficient)
        for mode, creation in term.ops:
            layout.check(mode)
            prod = prod.multiply(_ladder(mode, creation, n))
        out = out + prod
    return out


def _split(occupied: Iterable[int], n: int, species: str) -> tuple[list[int], list[int]]:
    occ = sorted(set(occupied))
    for i in occ:
        if not 0 <= i < n:
            raise ConfigurationError(f"occupied {species} mode {i} out of range 0..{n - 1}")
    virt = [a for a in range(n) if a not in occ]
    return occ, virt


def excitation_pool(layout: ModeLayout, occupied_e: Iterable[int], occupied_p: Iterable[int],
                    blocks: Sequence[str] = ("e1", "p1", "e2", "p2", "ep")) -> list[FermionOperator]:
    """Anti-Hermitian singles and doubles, electronic, protonic and mixed.

    Occupied indices are species-local (0-based within each species).
    Blocks with no admissible excitation are dropped with a warning.
    """
    occ_e, vir_e = _split(occupied_e, layout.n_electron, "electron")
    occ_p, vir_p = _split(occupied_p, layout.n_proton, "proton")
    ge = list(layout.electron_modes)
    gp = list(layout.proton_modes)
    occ = {"e": [ge[i] for i in occ_e], "p": [gp[i] for i in occ_p]}
    vir = {"e": [ge[a] for a in vir_e], "p": [gp[a] for a in vir_p]}

    def anti(creations, annihilations, label):
        t = excitation(creations, annihilations, 1.0, label)
        return t - t.dagger()

    pool: list[FermionOperator] = []
    for block in blocks:
        found: list[FermionOperator] = []
        if block in ("e1", "p1"):
            s = block[0]
            for i in occ[s]:
                for a in vir[s]:
                    found.append(anti([a], [i], f"{s}1:{i}->{a}"))
        elif block in ("e2", "p2"):
            s = block[0]
            for i, j in itertools.combinations(occ[s], 2):
                for a, b in itertools.combinations(vir[s], 2):
                    found.append(anti([a, b], [j, i], f"{s}2:{i},{j}->{a},{b}"))
        elif block == "ep":
            for i in occ["e"]:
                for a in vir["e"]:
                    for big_i in occ["p"]:
                        for big_a in vir["p"]:
                            found.append(anti([a, big_a], [big_i, i], f"ep:{i},{big_i}->{a},{big_a}"))
        else:
            raise ConfigurationError(f"unknown pool block {block!r}")
        species_present = layout.n_electron if block[0] == "e" else layout.n_proton
        if block == "ep":
            species_present = layout.n_electron and layout.n_proton
        if not found and species_present:
            warnings.warn(f"pool block {block} is empty for the given occupations; omitted", stacklevel=2)
        pool.extend(found)
    if not pool:
        raise ConfigurationError("operator pool is empty")
    return pool


def qubit_pool(jw_pool: Sequence[PauliSum]) -> list[PauliString]:
    """Split mapped pool elements into individual strings ``P`` (generator ``iP``)."""
    seen: set[str] = set()
    out: list[PauliString] = []
    for element in jw_pool:
        for letters in sorted(element.terms):
            if letters.count("Y") % 2 == 1 and letters not in seen:
                seen.add(letters)
                out.append(PauliString(letters))
    return out
