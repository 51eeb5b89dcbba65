"""Sparse algebra over weighted Pauli strings.

Qubit ``q`` is letter ``q`` of a string (leftmost is qubit 0) and the most
significant bit of a computational-basis index, so ``to_dense`` of ``"XZ"``
is ``kron(X, Z)``.
"""

from __future__ import annotations

from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy import sparse

from .errors import DimensionError, ParseError, ResourceLimitError, ValidationError

PRUNE_TOL = 1e-12
DENSE_LIMIT = 14
SPARSE_LIMIT = 22

LETTERS = "IXYZ"

# letter product table: (a, b) -> (phase, letter) with a*b = phase * letter
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_UNITS = (1, -1, 1j, -1j)


@lru_cache(maxsize=65536)
def _multiply_letters(a: str, b: str) -> tuple[complex, str]:
    phase = 1 + 0j
    out = []
    for la, lb in zip(a, b):
        p, lc = _PRODUCT[la, lb]
        phase *= p
        out.append(lc)
    return phase, "".join(out)


def _check_letters(letters: str) -> None:
    bad = set(letters) - set(LETTERS)
    if bad:
        raise ValidationError(f"invalid Pauli letters {sorted(bad)} in {letters!r}")


def masks(letters: str) -> tuple[int, int]:
    """Return ``(x_mask, z_mask)`` in basis-index bit order."""
    n = len(letters)
    x = z = 0
    for q, letter in enumerate(letters):
        bit = 1 << (n - 1 - q)
        if letter in "XY":
            x |= bit
        if letter in "YZ":
            z |= bit
    return x, z


@lru_cache(maxsize=4096)
def pauli_action(letters: str) -> tuple[np.ndarray, np.ndarray]:
    """Index map and phases such that ``(P psi)[j] = phase[j] * psi[src[j]]``."""
    n = len(letters)
    x, z = masks(letters)
    n_y = letters.count("Y")
    j = np.arange(1 << n, dtype=np.int64)
    src = j ^ x
    signs = 1 - 2 * (np.bitwise_count(src & z) & 1).astype(np.int64)
    phase = (1j ** n_y) * signs.astype(complex)
    src.setflags(write=False)
    phase.setflags(write=False)
    return src, phase


def apply_pauli(letters: str, psi: np.ndarray) -> np.ndarray:
    src, phase = pauli_action(letters)
    return phase * psi[src]


class PauliString:
    """A single Pauli string with a unit phase from {+1, -1, +i, -i}."""

    __slots__ = ("letters", "phase")

    def __init__(self, letters: str, phase: complex = 1):
        letters = letters.upper()
        _check_letters(letters)
        if not any(abs(phase - u) < 1e-15 for u in _UNITS):
            raise ValidationError(f"phase must be one of +-1, +-i, got {phase}")
        self.letters = letters
        self.phase = complex(phase)

    @classmethod
    def from_sparse(cls, n_qubits: int, ops: Mapping[int, str], phase: complex = 1) -> "PauliString":
        letters = ["I"] * n_qubits
        for q, letter in ops.items():
            if not 0 <= q < n_qubits:
                raise DimensionError(f"qubit {q} out of range for {n_qubits} qubits")
            letters[q] = letter
        return cls("".join(letters), phase)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(1 for c in self.letters if c != "I")

    def support(self) -> list[int]:
        return [q for q, c in enumerate(self.letters) if c != "I"]

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n_qubits != other.n_qubits:
            raise DimensionError("qubit-count mismatch")
        phase, letters = _multiply_letters(self.letters, other.letters)
        return PauliString(letters, phase * self.phase * other.phase)

    def commutes(self, other: "PauliString") -> bool:
        anti = sum(1 for a, b in zip(self.letters, other.letters) if a != "I" and b != "I" and a != b)
        return anti % 2 == 0

    def to_sum(self, coeff: complex = 1.0) -> "PauliSum":
        return PauliSum(self.n_qubits, {self.letters: coeff * self.phase})

    def __eq__(self, other):
        return isinstance(other, PauliString) and self.letters == other.letters and self.phase == other.phase

    def __hash__(self):
        return hash((self.letters, self.phase))

    def __repr__(self):
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[self.phase]
        return f"PauliString({sign}{self.letters})"


class PauliSum:
    """Canonical weighted sum of phase-free Pauli strings.

    Terms are keyed by letter pattern; phases are folded into the
    coefficients and anything smaller than ``tol`` in magnitude is dropped.
    Instances are treated as immutable values.
    """

    __slots__ = ("n_qubits", "_terms", "tol", "_sparse")

    def __init__(self, n_qubits: int, terms: Mapping[str, complex] | Iterable[tuple[str, complex]] | None = None,
                 tol: float = PRUNE_TOL):
        if n_qubits < 0:
            raise ValidationError("n_qubits must be non-negative")
        self.n_qubits = int(n_qubits)
        self.tol = tol
        acc: dict[str, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        for letters, coeff in items:
            letters = letters.upper()
            if len(letters) != self.n_qubits:
                raise DimensionError(f"term {letters!r} has {len(letters)} letters, expected {self.n_qubits}")
            _check_letters(letters)
            acc[letters] = acc.get(letters, 0) + complex(coeff)
        self._terms = MappingProxyType({k: v for k, v in acc.items() if abs(v) >= tol})
        self._sparse = None

    # constructors

    @classmethod
    def _raw(cls, n_qubits: int, terms: dict[str, complex], tol: float) -> "PauliSum":
        obj = cls.__new__(cls)
        obj.n_qubits = n_qubits
        obj.tol = tol
        obj._terms = MappingProxyType({k: v for k, v in terms.items() if abs(v) >= tol})
        obj._sparse = None
        return obj

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {"I" * n_qubits: coeff})

    @classmethod
    def single(cls, letters: str, coeff: complex = 1.0) -> "PauliSum":
        return cls(len(letters), {letters: coeff})

    @classmethod
    def from_ops(cls, n_qubits: int, ops: Mapping[int, str], coeff: complex = 1.0) -> "PauliSum":
        return PauliString.from_sparse(n_qubits, ops).to_sum(coeff)

    # container protocol

    @property
    def terms(self) -> Mapping[str, complex]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[str, complex]]:
        return iter(self._terms.items())

    def coeff(self, letters: str) -> complex:
        return self._terms.get(letters.upper(), 0j)

    def __repr__(self) -> str:
        body = " + ".join(f"({c.real:.6g}{c.imag:+.6g}j)*{p}" for p, c in sorted(self._terms.items()))
        return f"PauliSum({self.n_qubits}, {body or '0'})"

    # arithmetic

    def _check(self, other: "PauliSum") -> None:
        if not isinstance(other, PauliSum):
            raise TypeError(f"expected PauliSum, got {type(other).__name__}")
        if other.n_qubits != self.n_qubits:
            raise DimensionError(f"qubit-count mismatch: {self.n_qubits} vs {other.n_qubits}")

    def add_scaled(self, c: complex, other: "PauliSum") -> "PauliSum":
        """Return ``self + c * other``."""
        self._check(other)
        acc = dict(self._terms)
        for p, v in other._terms.items():
            acc[p] = acc.get(p, 0) + c * v
        return PauliSum._raw(self.n_qubits, acc, self.tol)

    def multiply(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc: dict[str, complex] = {}
        for pa, ca in self._terms.items():
            for pb, cb in other._terms.items():
                phase, pc = _multiply_letters(pa, pb)
                acc[pc] = acc.get(pc, 0) + phase * ca * cb
        return PauliSum._raw(self.n_qubits, acc, self.tol)

    def scale(self, c: complex) -> "PauliSum":
        return PauliSum._raw(self.n_qubits, {p: c * v for p, v in self._terms.items()}, self.tol)

    def __add__(self, other):
        if isinstance(other, PauliSum):
            return self.add_scaled(1.0, other)
        return self.add_scaled(1.0, PauliSum.identity(self.n_qubits, other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PauliSum):
            return self.add_scaled(-1.0, other)
        return self.add_scaled(-1.0, PauliSum.identity(self.n_qubits, other))

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return self.multiply(other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __matmul__(self, other):
        return self.multiply(other)

    def dagger(self) -> "PauliSum":
        return PauliSum._raw(self.n_qubits, {p: np.conj(v) for p, v in self._terms.items()}, self.tol)

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return self.multiply(other).add_scaled(-1.0, other.multiply(self))

    def simplify(self, tol: float | None = None) -> "PauliSum":
        return PauliSum._raw(self.n_qubits, dict(self._terms), self.tol if tol is None else tol)

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coeff(k) - other.coeff(k)) <= atol for k in keys)

    def __eq__(self, other):
        if not isinstance(other, PauliSum) or other.n_qubits != self.n_qubits:
            return NotImplemented
        return dict(self._terms) == dict(other._terms)

    __hash__ = None

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return all(abs(v.imag) <= atol for v in self._terms.values())

    def is_anti_hermitian(self, atol: float = 1e-12) -> bool:
        return all(abs(v.real) <= atol for v in self._terms.values())

    def real_part(self) -> "PauliSum":
        return PauliSum._raw(self.n_qubits, {p: complex(v.real) for p, v in self._terms.items()}, self.tol)

    def constant(self) -> complex:
        return self.coeff("I" * self.n_qubits)

    # matrices

    def to_sparse(self) -> sparse.csr_matrix:
        if self.n_qubits > SPARSE_LIMIT:
            raise ResourceLimitError(f"{self.n_qubits} qubits exceeds sparse limit {SPARSE_LIMIT}")
        if self._sparse is not None:
            return self._sparse
        dim = 1 << self.n_qubits
        if not self._terms:
            self._sparse = sparse.csr_matrix((dim, dim), dtype=complex)
            return self._sparse
        rows, cols, data = [], [], []
        for letters, c in self._terms.items():
            src, phase = pauli_action(letters)
            rows.append(np.arange(dim))
            cols.append(src)
            data.append(c * phase)
        mat = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        )
        self._sparse = mat.tocsr()
        return self._sparse

    def to_dense(self, limit: int = DENSE_LIMIT) -> np.ndarray:
        if self.n_qubits > limit:
            raise ResourceLimitError(f"{self.n_qubits} qubits exceeds dense limit {limit}")
        return self.to_sparse().toarray()

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi, dtype=complex)
        for letters, c in self._terms.items():
            out += c * apply_pauli(letters, psi)
        return out

    # text format: "coeff_re coeff_im LETTERS" per line

    def to_text(self) -> str:
        lines = [f"{c.real!r} {c.imag!r} {p}" for p, c in sorted(self._terms.items())]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "PauliSum":
        terms = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 're im LETTERS', got {raw!r}", lineno)
            try:
                c = complex(float(parts[0]), float(parts[1]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if n_qubits is None:
                n_qubits = len(parts[2])
            terms.append((parts[2], c))
        if n_qubits is None:
            raise ParseError("empty operator text and no qubit count given")
        return cls(n_qubits, terms)


def pauli_matrix(letters: str) -> np.ndarray:
    """Dense Kronecker product for one string (small sizes only)."""
    out = np.ones((1, 1), dtype=complex)
    for letter in letters:
        out = np.kron(out, _MATRICES[letter])
    return out
