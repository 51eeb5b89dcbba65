"""Gate-level circuit IR, Pauli-rotation synthesis, routing and metrics."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParseError, ResourceLimitError, RoutingError, ValidationError
from .pauli import PauliString

SQRT_HALF = np.sqrt(0.5)

ONE_QUBIT = {"RX", "RY", "RZ", "H", "X", "SX", "MEASURE"}
TWO_QUBIT = {"CZ", "CX", "SWAP", "U2"}
ROTATIONS = {"RX", "RY", "RZ"}

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])
_FIXED = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF,
    "X": _X,
    "SX": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    "CZ": np.diag([1.0 + 0j, 1, 1, -1]),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True, eq=False)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in ONE_QUBIT | TWO_QUBIT:
            raise ValidationError(f"unknown gate kind {kind!r}")
        arity = 2 if kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise ValidationError(f"{kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValidationError(f"{kind} qubits must be distinct, got {self.qubits}")
        if kind in ROTATIONS and self.angle is None:
            raise ValidationError(f"{kind} needs an angle")
        if kind == "U2":
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (4, 4) or not np.allclose(m.conj().T @ m, np.eye(4), atol=1e-10):
                raise ValidationError("U2 block must be a 4x4 unitary")
            object.__setattr__(self, "matrix", m)

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in TWO_QUBIT

    def unitary(self) -> np.ndarray:
        if self.kind == "RX":
            return rx(self.angle)
        if self.kind == "RY":
            return ry(self.angle)
        if self.kind == "RZ":
            return rz(self.angle)
        if self.kind == "U2":
            return self.matrix
        if self.kind == "MEASURE":
            raise ValidationError("measurement has no unitary")
        return _FIXED[self.kind]

    def inverse(self) -> "Gate":
        if self.kind in ROTATIONS:
            return Gate(self.kind, self.qubits, -self.angle)
        if self.kind == "SX":
            # equal to SX^dagger up to a global phase
            return Gate("RX", self.qubits, -np.pi / 2)
        if self.kind == "U2":
            return Gate("U2", self.qubits, matrix=self.matrix.conj().T)
        if self.kind == "MEASURE":
            raise ValidationError("measurement is not invertible")
        return self

    def remap(self, mapping) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.angle, self.matrix)

    def to_text(self) -> str:
        qs = ",".join(str(q) for q in self.qubits)
        if self.kind == "U2":
            nums = " ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in self.matrix.ravel())
            return f"U2 {qs} {nums}"
        if self.angle is not None:
            return f"{self.kind} {qs} {float(self.angle)!r}"
        return f"{self.kind} {qs}"

    def __repr__(self):
        return f"Gate({self.to_text()[:60]})"


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise DimensionError(f"gate {g} out of range for {self.n_qubits} qubits")

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot concatenate circuits of different width")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def append(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n_qubits, self.gates + tuple(gates))

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def without_measurements(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g for g in self.gates if g.kind != "MEASURE"), dict(self.meta))

    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if g.is_two_qubit)

    def unitary(self, limit: int = 12) -> np.ndarray:
        """Dense unitary in big-endian qubit order (qubit 0 most significant)."""
        if self.n_qubits > limit:
            raise ResourceLimitError(f"{self.n_qubits} qubits exceeds dense unitary limit {limit}")
        from .sim import apply_gate

        dim = 1 << self.n_qubits
        u = np.eye(dim, dtype=complex).reshape((2,) * self.n_qubits + (dim,))
        for g in self.gates:
            if g.kind == "MEASURE":
                continue
            u = apply_gate(u, g)
        return u.reshape(dim, dim)

    def to_text(self) -> str:
        return "".join(g.to_text() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "Circuit":
        gates = []
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                if raw.strip().startswith("# qubits"):
                    declared = int(raw.split()[-1])
                continue
            parts = line.split()
            kind = parts[0].upper()
            try:
                qubits = tuple(int(q) for q in parts[1].split(","))
                if kind == "U2":
                    vals = [float(x) for x in parts[2:]]
                    if len(vals) != 32:
                        raise ParseError("U2 needs 32 real numbers", lineno)
                    m = (np.array(vals[0::2]) + 1j * np.array(vals[1::2])).reshape(4, 4)
                    gates.append(Gate(kind, qubits, matrix=m))
                else:
                    angle = float(parts[2]) if len(parts) > 2 else None
                    gates.append(Gate(kind, qubits, angle))
            except ParseError:
                raise
            except (IndexError, ValueError) as exc:
                raise ParseError(f"bad gate line {raw!r}: {exc}", lineno) from None
        if n_qubits is None:
            n_qubits = declared
        if n_qubits is None:
            n_qubits = 1 + max((max(g.qubits) for g in gates), default=-1)
        return cls(n_qubits, gates)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(f"# qubits {self.n_qubits}\n" + self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "Circuit":
        text = Path(path).read_text()
        n = None
        for raw in text.splitlines():
            if raw.strip().startswith("# qubits"):
                n = int(raw.split()[-1])
                break
        return cls.from_text(text, n)


# Pauli-rotation synthesis


def pauli_evolution(gen: PauliString, theta: float) -> Circuit:
    """Circuit for ``exp(-i theta/2 P)`` via basis change and a CX ladder."""
    n = gen.n_qubits
    support = gen.support()
    if not support:
        warnings.warn("identity generator only contributes a global phase; emitting empty circuit", stacklevel=2)
        return Circuit(n)
    pre, post = [], []
    for q in support:
        letter = gen.letters[q]
        if letter == "X":
            pre.append(Gate("H", (q,)))
            post.append(Gate("H", (q,)))
        elif letter == "Y":
            pre.append(Gate("RX", (q,), np.pi / 2))
            post.append(Gate("RX", (q,), -np.pi / 2))
    ladder = [Gate("CX", (a, b)) for a, b in zip(support, support[1:])]
    if abs(gen.phase.imag) > 0:
        raise ValidationError("rotation generator must have a real phase")
    angle = theta * gen.phase.real
    middle = [Gate("RZ", (support[-1],), float(angle))]
    return Circuit(n, pre + ladder + middle + ladder[::-1] + post)


# coupling maps


@dataclass(frozen=True, eq=False)
class CouplingMap:
    n_qubits: int
    edges: frozenset

    def __post_init__(self):
        norm = frozenset(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        for a, b in norm:
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValidationError(f"invalid edge ({a}, {b}) for {self.n_qubits} qubits")
        object.__setattr__(self, "edges", norm)

    @classmethod
    def line(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def full(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def from_spec(cls, spec: str, n_needed: int | None = None) -> "CouplingMap":
        """``heavyhex:D``, ``line:N``, ``full:N``; heavy-hex maps are cut to
        a connected ``n_needed``-qubit patch when ``n_needed`` is given."""
        kind, _, arg = spec.partition(":")
        kind = kind.lower()
        if kind == "heavyhex":
            cmap = heavy_hex(int(arg or 1))
            return cmap.patch(n_needed) if n_needed else cmap
        n = int(arg) if arg else n_needed
        if n is None:
            raise ValidationError(f"coupling spec {spec!r} needs a size")
        if kind == "line":
            return cls.line(n)
        if kind == "full":
            return cls.full(n)
        raise ValidationError(f"unknown coupling spec {spec!r}")

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.n_qubits)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def shortest_path(self, a: int, b: int) -> list[int]:
        prev = {a: None}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                break
            for v in self.neighbors[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        if b not in prev:
            raise RoutingError(f"qubits {a} and {b} are not connected in the coupling map")
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        return path[::-1]

    def is_connected(self, nodes: Iterable[int] | None = None) -> bool:
        nodes = set(range(self.n_qubits) if nodes is None else nodes)
        if not nodes:
            return True
        start = min(nodes)
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return nodes <= seen

    def degree_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for nb in self.neighbors:
            hist[len(nb)] = hist.get(len(nb), 0) + 1
        return dict(sorted(hist.items()))

    def subgraph(self, nodes: Sequence[int]) -> "CouplingMap":
        index = {q: i for i, q in enumerate(nodes)}
        edges = frozenset((index[a], index[b]) for a, b in self.edges if a in index and b in index)
        return CouplingMap(len(nodes), edges)

    def patch(self, n: int) -> "CouplingMap":
        """Connected ``n``-qubit patch grown from qubit 0 by depth-first walk."""
        if n > self.n_qubits:
            raise ResourceLimitError(f"coupling map has {self.n_qubits} qubits, {n} requested")
        order, seen, stack = [], set(), [0]
        while stack and len(order) < n:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            order.append(u)
            stack.extend(v for v in reversed(self.neighbors[u]) if v not in seen)
        return self.subgraph(order)


def _honeycomb_cells(rows: int, cols: int):
    """Hexagons of an odd-row-offset honeycomb in brick-wall coordinates."""
    for r in range(rows):
        for k in range(cols):
            c = 2 * k + (r % 2)
            top = [(r, c), (r, c + 1), (r, c + 2)]
            bottom = [(r + 1, c), (r + 1, c + 1), (r + 1, c + 2)]
            yield top, bottom


def heavy_hex(distance: int) -> CouplingMap:
    """Heavy-hexagon lattice of ``distance x distance`` hexagonal cells.

    Built from a honeycomb of cells by placing an extra qubit on every edge,
    so vertex degrees are at most 3.  With ``V = 2(d+1)^2 - 2`` honeycomb
    vertices and ``E = 3d^2 + 4d - 1`` honeycomb edges the map has ``V + E``
    qubits and ``2E`` couplings; ``distance=1`` is a single 12-qubit ring.
    """
    if distance < 1:
        raise ValidationError("heavy-hex distance must be >= 1")
    vertices, hedges = set(), set()
    for top, bottom in _honeycomb_cells(distance, distance):
        ring = top + bottom[::-1]
        for i in range(6):
            a, b = ring[i], ring[(i + 1) % 6]
            vertices.update((a, b))
            hedges.add(tuple(sorted((a, b))))
    index = {v: i for i, v in enumerate(sorted(vertices))}
    edges = []
    nxt = len(index)
    for a, b in sorted(hedges):
        edges.append((index[a], nxt))
        edges.append((nxt, index[b]))
        nxt += 1
    return CouplingMap(nxt, frozenset(edges))


# KAK decomposition and CZ synthesis

_MAGIC = SQRT_HALF * np.array([[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]])
_XX, _YY, _ZZ = np.kron(_X, _X), np.kron(_Y, _Y), np.kron(_Z, _Z)
_CANON_SIGNS = np.real(np.array([np.diag(_MAGIC.conj().T @ m @ _MAGIC) for m in (_XX, _YY, _ZZ)]))
_CANON_SOLVE = np.linalg.inv(np.vstack([_CANON_SIGNS, np.ones(4)]).T)


def canonical_gate(a: float, b: float, c: float) -> np.ndarray:
    """``exp(i (a XX + b YY + c ZZ))``."""
    d = _CANON_SIGNS.T @ np.array([a, b, c])
    return _MAGIC @ np.diag(np.exp(1j * d)) @ _MAGIC.conj().T


def _real_orthogonal_diagonalizer(m: np.ndarray) -> np.ndarray:
    re, im = m.real, m.imag
    rng = np.random.default_rng(7)
    for _ in range(20):
        r = rng.normal()
        _, p = np.linalg.eigh(re + r * im)
        d = p.T @ m @ p
        if np.allclose(d, np.diag(np.diag(d)), atol=1e-9):
            return p
    raise ValidationError("failed to diagonalize two-qubit block")


def kron_factor(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``m = A (x) B`` into SU(2) factors, up to a global phase."""
    r = m.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    a = (u[:, 0] * np.sqrt(s[0])).reshape(2, 2)
    b = (vh[0] * np.sqrt(s[0])).reshape(2, 2)
    a = a / np.sqrt(np.linalg.det(a))
    b = b / np.sqrt(np.linalg.det(b))
    return a, b


def kak_decompose(u: np.ndarray):
    """``u = phase * (A1 (x) A0) @ canonical_gate(a, b, c) @ (B1 (x) B0)``.

    Returns ``(phase, (A1, A0), (a, b, c), (B1, B0))``; ``A1``/``B1`` act on
    the first (more significant) qubit.
    """
    u = np.asarray(u, dtype=complex)
    su = u / np.linalg.det(u) ** 0.25
    up = _MAGIC.conj().T @ su @ _MAGIC
    p = _real_orthogonal_diagonalizer(up.T @ up)
    if np.linalg.det(p) < 0:
        p[:, 0] *= -1
    d = np.diag(p.T @ up.T @ up @ p)
    half = np.exp(0.5j * np.angle(d))
    if np.real(np.prod(half)) < 0:
        half[0] *= -1
    k1 = np.real(up @ p @ np.diag(half.conj()))
    left = _MAGIC @ k1 @ _MAGIC.conj().T
    right = _MAGIC @ p.T @ _MAGIC.conj().T
    a1, a0 = kron_factor(left)
    b1, b0 = kron_factor(right)
    coeffs = _CANON_SOLVE @ np.angle(half)
    a, b, c = coeffs[:3]
    recon = np.kron(a1, a0) @ canonical_gate(a, b, c) @ np.kron(b1, b0)
    k = np.argmax(np.abs(recon))
    phase = u.flat[k] / recon.flat[k]
    return phase, (a1, a0), (float(a), float(b), float(c)), (b1, b0)


def zyz_angles(v: np.ndarray) -> tuple[float, float, float]:
    """Angles with ``v ~ rz(alpha) @ ry(beta) @ rz(gamma)`` up to global phase."""
    v = v / np.sqrt(np.linalg.det(v))
    beta = 2 * np.arctan2(abs(v[1, 0]), abs(v[1, 1]))
    s = np.angle(v[1, 1]) if abs(v[1, 1]) > 1e-12 else 0.0
    d = np.angle(v[1, 0]) if abs(v[1, 0]) > 1e-12 else 0.0
    return float(s + d), float(beta), float(s - d)


def _one_qubit_gates(v: np.ndarray, q: int, atol: float = 1e-12) -> list[Gate]:
    alpha, beta, gamma = zyz_angles(v)
    out = []
    for kind, ang in (("RZ", gamma), ("RY", beta), ("RZ", alpha)):
        ang = float(np.angle(np.exp(1j * ang)))
        if abs(ang) > atol:
            out.append(Gate(kind, (q,), ang))
    return out


def _cx_as_cz(control: int, target: int) -> list[Gate]:
    return [Gate("H", (target,)), Gate("CZ", (control, target)), Gate("H", (target,))]


def two_qubit_to_cz(u: np.ndarray, q0: int, q1: int) -> list[Gate]:
    """At most three CZ plus single-qubit rotations implementing ``u`` on
    ``(q0, q1)``, with ``q0`` the more significant qubit."""
    _, (a1, a0), (a, b, c), (b1, b0) = kak_decompose(u)
    # canonical coefficients that are multiples of pi/2 give a local Pauli product
    if all(abs(np.exp(4j * x) - 1) < 1e-10 for x in (a, b, c)):
        v1, v0 = kron_factor(np.asarray(u, dtype=complex))
        return _one_qubit_gates(v1, q0) + _one_qubit_gates(v0, q1)
    gates = _one_qubit_gates(b1, q0) + _one_qubit_gates(b0, q1)
    t1, t2, t3 = np.pi / 2 - 2 * c, 2 * a - np.pi / 2, np.pi / 2 - 2 * b
    gates += [Gate("RZ", (q1,), -np.pi / 2)]
    gates += _cx_as_cz(q1, q0)
    gates += [Gate("RZ", (q0,), t1), Gate("RY", (q1,), t2)]
    gates += _cx_as_cz(q0, q1)
    gates += [Gate("RY", (q1,), t3)]
    gates += _cx_as_cz(q1, q0)
    gates += [Gate("RZ", (q0,), np.pi / 2)]
    gates += _one_qubit_gates(a1, q0) + _one_qubit_gates(a0, q1)
    return gates


def decompose_to_cz(gate: Gate) -> list[Gate]:
    if gate.kind == "CX":
        return _cx_as_cz(*gate.qubits)
    if gate.kind == "SWAP":
        a, b = gate.qubits
        return _cx_as_cz(a, b) + _cx_as_cz(b, a) + _cx_as_cz(a, b)
    if gate.kind == "U2":
        return two_qubit_to_cz(gate.matrix, *gate.qubits)
    return [gate]


# routing


def transpile(c: Circuit, cmap: CouplingMap, layout: str | Sequence[int] = "trivial",
              decompose: bool = True) -> Circuit:
    """Greedy SWAP routing onto ``cmap`` followed by CZ-basis decomposition.

    The returned circuit lives on ``cmap.n_qubits`` physical qubits and
    records ``initial_layout`` and ``final_layout`` (virtual -> physical) in
    its ``meta``.
    """
    if c.n_qubits > cmap.n_qubits:
        raise ResourceLimitError(f"circuit needs {c.n_qubits} qubits, map has {cmap.n_qubits}")
    initial = list(range(c.n_qubits)) if layout == "trivial" else [int(q) for q in layout]
    if len(initial) != c.n_qubits or len(set(initial)) != len(initial):
        raise ValidationError("layout must assign distinct physical qubits to every virtual qubit")
    used = {q for g in c.gates for q in g.qubits}
    if not cmap.is_connected(initial[q] for q in used):
        raise RoutingError("qubits used by the circuit are not connected in the coupling map")
    v2p = list(initial)
    p2v = {p: v for v, p in enumerate(v2p)}
    out: list[Gate] = []
    for g in c.gates:
        if g.is_two_qubit:
            a, b = g.qubits
            pa, pb = v2p[a], v2p[b]
            if not cmap.adjacent(pa, pb):
                path = cmap.shortest_path(pa, pb)
                for x, y in zip(path[:-2], path[1:-1]):
                    out.append(Gate("SWAP", (x, y)))
                    vx, vy = p2v.get(x), p2v.get(y)
                    p2v.pop(x, None)
                    p2v.pop(y, None)
                    if vx is not None:
                        v2p[vx] = y
                        p2v[y] = vx
                    if vy is not None:
                        v2p[vy] = x
                        p2v[x] = vy
        out.append(g.remap(v2p))
    if decompose:
        out = [h for g in out for h in decompose_to_cz(g)]
    meta = {"initial_layout": initial, "final_layout": list(v2p)}
    return Circuit(cmap.n_qubits, out, meta)


def layout_permutation(layout: Sequence[int], n_physical: int) -> np.ndarray:
    """Matrix sending a virtual basis state to its physical placement."""
    n = len(layout)
    if n != n_physical:
        raise DimensionError("dense layout checks need as many virtual as physical qubits")
    dim = 1 << n
    perm = np.zeros((dim, dim))
    for b in range(dim):
        bits = [(b >> (n - 1 - v)) & 1 for v in range(n)]
        out = 0
        for v, p in enumerate(layout):
            out |= bits[v] << (n - 1 - p)
        perm[out, b] = 1
    return perm


def two_qubit_metrics(c: Circuit) -> tuple[int, int]:
    """Two-qubit gate count and depth; one-qubit gates and measurements are free."""
    level = [0] * c.n_qubits
    count = depth = 0
    for g in c.gates:
        if not g.is_two_qubit:
            continue
        a, b = g.qubits
        d = max(level[a], level[b]) + 1
        level[a] = level[b] = d
        count += 1
        depth = max(depth, d)
    return count, depth


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-8) -> bool:
    k = np.argmax(np.abs(b))
    if abs(b.flat[k]) < atol:
        return np.allclose(a, b, atol=atol)
    phase = a.flat[k] / b.flat[k]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)
