"""NEO integrals, Hamiltonian assembly and path interpolation.

Two-body electronic integrals are held in physicists' order,
``eri[p, q, r, s] = <pq|rs>``, for the operator
``1/2 sum <pq|rs> a+_p a+_q a_s a_r``.  The chemists' tensor ``(pq|rs)``
used with ``1/2 sum (pq|rs) a+_p a+_r a_s a_q`` is ``eri.transpose(0, 2, 1, 3)``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConditioningError, DimensionError, ParseError, SymmetryError, ValidationError
from .fermion import FermionTerm, ModeLayout, jordan_wigner
from .pauli import PauliSum

SYM_TOL = 1e-10
TRAJECTORY = ("300", "210", "120", "030", "021", "012", "003")


@dataclass(frozen=True, eq=False)
class NeoIntegrals:
    layout: ModeLayout
    h1e: np.ndarray  # h_pq
    eri: np.ndarray  # <pq|rs>
    h1p: np.ndarray  # v_PQ, protonic kinetic energy included
    gep: np.ndarray  # g_PQpq for a+_P a+_p a_q a_Q
    e_core: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ne, npr = self.layout.n_electron, self.layout.n_proton
        shapes = {
            "h1e": (self.h1e, (ne, ne)),
            "eri": (self.eri, (ne,) * 4),
            "h1p": (self.h1p, (npr, npr)),
            "gep": (self.gep, (npr, npr, ne, ne)),
        }
        for name, (arr, shape) in shapes.items():
            if arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
        validate_symmetry(self)

    @classmethod
    def empty(cls, n_electron: int, n_proton: int = 0, e_core: float = 0.0) -> "NeoIntegrals":
        ne, npr = n_electron, n_proton
        return cls(ModeLayout(ne, npr), np.zeros((ne, ne)), np.zeros((ne,) * 4),
                   np.zeros((npr, npr)), np.zeros((npr, npr, ne, ne)), e_core)

    def with_core(self, e_core: float) -> "NeoIntegrals":
        return replace(self, e_core=float(e_core))


def _first_violation(a: np.ndarray, b: np.ndarray):
    bad = np.argwhere(np.abs(a - b) > SYM_TOL)
    return None if len(bad) == 0 else tuple(int(i) + 1 for i in bad[0])


def validate_symmetry(ints: NeoIntegrals) -> None:
    checks = [
        ("h_pq", ints.h1e, ints.h1e.conj().T),
        ("v_PQ", ints.h1p, ints.h1p.conj().T),
        ("h_pqrs exchange", ints.eri, ints.eri.transpose(1, 0, 3, 2)),
        ("h_pqrs hermiticity", ints.eri, ints.eri.transpose(2, 3, 0, 1).conj()),
        ("g_PQpq hermiticity", ints.gep, ints.gep.transpose(1, 0, 3, 2).conj()),
    ]
    for name, a, b in checks:
        idx = _first_violation(a, b)
        if idx is not None:
            raise SymmetryError(f"{name} symmetry violated at 1-based indices {idx}")


# assembly


def assemble(ints: NeoIntegrals, cutoff: float = 1e-14) -> PauliSum:
    """Qubit Hamiltonian of the electron-proton system, core energy included."""
    layout = ints.layout
    n = layout.n_modes
    ne = layout.n_electron
    terms: list[FermionTerm] = []
    for p, q in zip(*np.nonzero(np.abs(ints.h1e) > cutoff)):
        terms.append(FermionTerm(ints.h1e[p, q], ((p, True), (q, False))))
    for p, q, r, s in zip(*np.nonzero(np.abs(ints.eri) > cutoff)):
        if p == q or r == s:
            continue
        terms.append(FermionTerm(0.5 * ints.eri[p, q, r, s], ((p, True), (q, True), (s, False), (r, False))))
    for big_p, big_q in zip(*np.nonzero(np.abs(ints.h1p) > cutoff)):
        P, Q = ne + big_p, ne + big_q
        terms.append(FermionTerm(ints.h1p[big_p, big_q], ((P, True), (Q, False))))
    for big_p, big_q, p, q in zip(*np.nonzero(np.abs(ints.gep) > cutoff)):
        P, Q = ne + big_p, ne + big_q
        terms.append(FermionTerm(ints.gep[big_p, big_q, p, q], ((P, True), (p, True), (q, False), (Q, False))))
    acc: dict[str, complex] = {}
    for term in terms:
        term = FermionTerm(term.coefficient, tuple((int(m), c) for m, c in term.ops))
        for letters, c in jordan_wigner(term, layout):
            acc[letters] = acc.get(letters, 0) + c
    ham = PauliSum(n, acc) + PauliSum.identity(n, ints.e_core)
    # drop round-off imaginary parts; Hermitian input guarantees real coefficients
    return ham.real_part()


# LMR interpolation


@dataclass(frozen=True)
class LmrWeights:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        w = (self.alpha, self.beta, self.gamma)
        if min(w) < 0 or sum(w) <= 0:
            raise ValidationError(f"LMR weights must be non-negative with positive sum, got {w}")
        total = sum(w)
        object.__setattr__(self, "alpha", self.alpha / total)
        object.__setattr__(self, "beta", self.beta / total)
        object.__setattr__(self, "gamma", self.gamma / total)

    @classmethod
    def from_label(cls, label: str) -> "LmrWeights":
        if not re.fullmatch(r"\d{3}", label) or sum(int(d) for d in label) != 3:
            raise ValidationError(f"LMR label must be three digits summing to 3, got {label!r}")
        a, b, c = (Fraction(int(d), 3) for d in label)
        return cls(float(a), float(b), float(c))

    @classmethod
    def parse(cls, text: str) -> "LmrWeights":
        parts = [float(Fraction(x.strip())) for x in text.split(",")]
        if len(parts) != 3:
            raise ValidationError(f"expected three comma-separated weights, got {text!r}")
        return cls(*parts)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


def interpolate(h_left: PauliSum, h_middle: PauliSum, h_right: PauliSum, w: LmrWeights) -> PauliSum:
    if not h_left.n_qubits == h_middle.n_qubits == h_right.n_qubits:
        raise DimensionError("LMR Hamiltonians must act on the same register")
    out = PauliSum.zero(h_left.n_qubits)
    for coeff, ham in zip(w.as_tuple(), (h_left, h_middle, h_right)):
        if coeff:
            out = out.add_scaled(coeff, ham)
    return out


# orbital utilities


def _check_hermitian(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square")
    if not np.allclose(m, m.conj().T, atol=SYM_TOL, rtol=0):
        raise SymmetryError(f"{name} is not Hermitian")
    return m


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        j = np.argmax(np.abs(vecs[:, k]))
        ph = vecs[j, k] / abs(vecs[j, k])
        vecs[:, k] /= ph
    return vecs


def fno_select(density: np.ndarray, n_keep: int, psd_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Natural orbitals of ``density`` with the ``n_keep`` largest occupations.

    Returns the ``(dim, n_keep)`` rotation and the kept occupation numbers in
    descending order.
    """
    density = _check_hermitian(density, "density matrix")
    if not 0 <= n_keep <= density.shape[0]:
        raise ValidationError(f"n_keep={n_keep} outside 0..{density.shape[0]}")
    occ, vecs = np.linalg.eigh(density)
    if occ[0] < -psd_tol:
        raise ValidationError(f"density matrix not positive semidefinite (min eigenvalue {occ[0]:.3e})")
    order = np.argsort(-occ, kind="stable")
    occ, vecs = occ[order], _fix_signs(vecs[:, order])
    return vecs[:, :n_keep], occ[:n_keep]


def lowdin(overlap: np.ndarray, threshold: float = 1e-8) -> np.ndarray:
    """Symmetric orthogonalizer ``S^(-1/2)``."""
    overlap = _check_hermitian(overlap, "overlap matrix")
    w, u = np.linalg.eigh(overlap)
    if w[0] <= threshold:
        raise ConditioningError(f"overlap matrix near-singular: min eigenvalue {w[0]:.3e} <= {threshold:.1e}")
    t = (u * (1.0 / np.sqrt(w))) @ u.conj().T
    return 0.5 * (t + t.conj().T)


def transform(ints: NeoIntegrals, electron_rotation: np.ndarray | None = None,
              proton_rotation: np.ndarray | None = None) -> NeoIntegrals:
    """Rotate (and possibly truncate) the orbital bases, e.g. onto kept FNOs."""
    ce = np.eye(ints.layout.n_electron) if electron_rotation is None else np.asarray(electron_rotation)
    cp = np.eye(ints.layout.n_proton) if proton_rotation is None else np.asarray(proton_rotation)
    cec, cpc = ce.conj(), cp.conj()
    h1e = cec.T @ ints.h1e @ ce
    eri = np.einsum("pqrs,pa,qb,rc,sd->abcd", ints.eri, cec, cec, ce, ce, optimize=True)
    h1p = cpc.T @ ints.h1p @ cp
    gep = np.einsum("PQpq,PA,QB,pa,qb->ABab", ints.gep, cpc, cp, cec, ce, optimize=True)
    layout = ModeLayout(ce.shape[1], cp.shape[1])
    return NeoIntegrals(layout, h1e, eri, h1p, gep, ints.e_core, dict(ints.meta))


# NEO-FCIDUMP text format

_HEADER_RE = re.compile(r"(\w+)\s*=\s*([^\s,]+)")
_BLOCKS = {"E1": 2, "E2": 4, "P1": 2, "EP": 4}


def _sym_group(sym: int):
    """Index permutations of the chemists' tensor implied by ``sym``."""
    base = [lambda p, q, r, s: (p, q, r, s)]
    if sym >= 4:
        base += [lambda p, q, r, s: (r, s, p, q),
                 lambda p, q, r, s: (q, p, s, r),
                 lambda p, q, r, s: (s, r, q, p)]
    if sym >= 8:
        base += [lambda p, q, r, s: (q, p, r, s),
                 lambda p, q, r, s: (p, q, s, r),
                 lambda p, q, r, s: (r, s, q, p),
                 lambda p, q, r, s: (s, r, p, q)]
    return base


def _put(arr, filled, idx, value, block, lineno):
    if filled[idx] and abs(arr[idx] - value) > SYM_TOL:
        one_based = tuple(i + 1 for i in idx)
        raise SymmetryError(f"line {lineno}: {block} entry {one_based} conflicts with its symmetry partner "
                            f"({arr[idx]!r} vs {value!r})")
    arr[idx] = value
    filled[idx] = True


def parse_integrals(path: str | Path) -> NeoIntegrals:
    text = Path(path).read_text()
    return parse_integrals_text(text)


def parse_integrals_text(text: str) -> NeoIntegrals:
    header = None
    block = None
    rows: dict[str, list[tuple[int, float, tuple[int, ...]]]] = {k: [] for k in _BLOCKS}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            if not line.upper().startswith("&NEO"):
                raise ParseError("file must start with an &NEO header", lineno)
            header = {k.upper(): v for k, v in _HEADER_RE.findall(line)}
            continue
        if line.upper() in _BLOCKS:
            block = line.upper()
            continue
        if line.upper() in ("&END", "/"):
            continue
        if block is None:
            raise ParseError(f"data row outside of a block: {raw!r}", lineno)
        parts = line.split()
        want = _BLOCKS[block] + 1
        if len(parts) != want:
            raise ParseError(f"{block} rows need {want} fields, got {len(parts)}", lineno)
        try:
            value = float(parts[0])
            idx = tuple(int(x) - 1 for x in parts[1:])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if min(idx) < 0:
            raise ParseError("indices are 1-based", lineno)
        rows[block].append((lineno, value, idx))
    if header is None:
        raise ParseError("missing &NEO header")
    try:
        ne = int(header["NELEC_MODES"])
        npr = int(header.get("NPROT_MODES", 0))
        conv = header.get("CONV", "PHYS").upper()
        e_core = float(header.get("ECORE", 0.0))
        sym = int(header.get("SYM", 1))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad header: {exc}", 1) from None
    if conv not in ("PHYS", "CHEM"):
        raise ParseError(f"CONV must be PHYS or CHEM, got {conv}", 1)
    if sym not in (1, 4, 8):
        raise ParseError(f"SYM must be 1, 4 or 8, got {sym}", 1)

    limits = {"E1": ne, "E2": ne, "P1": npr, "EP": None}
    arrays = {
        "E1": np.zeros((ne, ne)), "E2": np.zeros((ne,) * 4),
        "P1": np.zeros((npr, npr)), "EP": np.zeros((npr, npr, ne, ne)),
    }
    filled = {k: np.zeros(v.shape, dtype=bool) for k, v in arrays.items()}
    for name, entries in rows.items():
        arr, mask = arrays[name], filled[name]
        for lineno, value, idx in entries:
            bounds = (npr, npr, ne, ne) if name == "EP" else (limits[name],) * len(idx)
            if any(i >= b for i, b in zip(idx, bounds)):
                raise ParseError(f"{name} index {tuple(i + 1 for i in idx)} out of range", lineno)
            if name in ("E1", "P1"):
                continue
            elif name == "EP":
                P, Q, p, q = idx
                _put(arr, mask, (P, Q, p, q), value, name, lineno)
            else:
                chem = idx if conv == "CHEM" else (idx[0], idx[2], idx[1], idx[3])
                for perm in _sym_group(sym):
                    c = perm(*chem)
                    phys = (c[0], c[2], c[1], c[3])
                    _put(arr, mask, phys, value, name, lineno)
    # one-body implied partners are only defaults; explicit rows must agree
    for name in ("E1", "P1"):
        arr = arrays[name]
        explicit = {(idx[0], idx[1]): (lineno, v) for lineno, v, idx in rows[name]}
        for (p, q), (lineno, v) in explicit.items():
            if (q, p) in explicit and abs(explicit[q, p][1] - v) > SYM_TOL:
                raise SymmetryError(f"line {lineno}: {name} entry ({p + 1}, {q + 1}) = {v!r} but "
                                    f"({q + 1}, {p + 1}) = {explicit[q, p][1]!r}")
            arr[p, q] = v
            if (q, p) not in explicit:
                arr[q, p] = v
    # EP hermitian partner fill
    gep = arrays["EP"]
    explicit_ep = filled["EP"].copy()
    for P, Q, p, q in zip(*np.nonzero(explicit_ep)):
        if not explicit_ep[Q, P, q, p]:
            gep[Q, P, q, p] = gep[P, Q, p, q]
    return NeoIntegrals(ModeLayout(ne, npr), arrays["E1"], arrays["E2"], arrays["P1"], gep, e_core,
                        {"source_conv": conv, "sym": sym})


def format_integrals(ints: NeoIntegrals, conv: str = "PHYS", cutoff: float = 0.0) -> str:
    conv = conv.upper()
    lay = ints.layout
    lines = [f"&NEO NELEC_MODES={lay.n_electron} NPROT_MODES={lay.n_proton} CONV={conv} "
             f"ECORE={ints.e_core!r} SYM=1"]

    def rows(arr, label, reorder=None):
        lines.append(label)
        for idx in itertools.product(*(range(n) for n in arr.shape)):
            v = float(arr[idx].real)
            if abs(v) > cutoff:
                out = reorder(idx) if reorder else idx
                lines.append(f"{v!r} " + " ".join(str(i + 1) for i in out))

    rows(ints.h1e, "E1")
    if conv == "CHEM":
        chem = ints.eri.transpose(0, 2, 1, 3)
        rows(chem, "E2")
    else:
        rows(ints.eri, "E2")
    rows(ints.h1p, "P1")
    rows(ints.gep, "EP")
    return "\n".join(lines) + "\n"


def write_integrals(ints: NeoIntegrals, path: str | Path, conv: str = "PHYS") -> None:
    Path(path).write_text(format_integrals(ints, conv))


# toy systems


def toy_integrals(n_electron: int, n_proton: int, seed: int = 0, scale: float = 0.3,
                  proton_site: int | None = None, e_core: float = 0.0, well_depth: float = 0.4) -> NeoIntegrals:
    """Random real integrals with the full 8-fold two-body symmetry.

    Diagonal one-body energies increase with mode index so the lowest modes
    form a sensible reference determinant; ``proton_site`` lowers the
    potential of one protonic mode by ``well_depth``.
    """
    rng = np.random.default_rng(seed)
    ne, npr = n_electron, n_proton
    h1e = rng.normal(scale=0.1 * scale, size=(ne, ne))
    h1e = 0.5 * (h1e + h1e.T) + np.diag(np.linspace(-1.0, 0.5, ne) if ne else [])
    chem = rng.normal(scale=0.05 * scale, size=(ne,) * 4)
    sym = np.zeros_like(chem)
    for perm in [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
                 (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]:
        sym += chem.transpose(perm)
    sym /= 8
    for p in range(ne):
        for q in range(ne):
            sym[p, p, q, q] += 0.4 * scale
    eri = sym.transpose(0, 2, 1, 3).copy()
    h1p = rng.normal(scale=0.05 * scale, size=(npr, npr))
    h1p = 0.5 * (h1p + h1p.T) + 0.15 * np.eye(npr)
    if proton_site is not None:
        h1p[proton_site, proton_site] -= well_depth
    gep = rng.normal(scale=0.05 * scale, size=(npr, npr, ne, ne))
    gep = 0.5 * (gep + gep.transpose(1, 0, 3, 2))
    for P in range(npr):
        for p in range(ne):
            gep[P, P, p, p] -= 0.1 * scale
    return NeoIntegrals(ModeLayout(ne, npr), h1e, eri, h1p, gep, e_core, {"toy_seed": seed})


def toy_lmr(n_electron: int, n_proton: int, seed: int = 0, scale: float = 0.3,
            well_depth: float = 0.03, barrier: float = 0.005) -> dict[str, NeoIntegrals]:
    """Symmetric double-well Left/Middle/Right toy set.

    Left lowers the first protonic mode by ``well_depth``; Right is Left with
    the protonic modes mirrored, so both share one spectrum.  Middle is their
    average with the proton potential raised by ``barrier``; since the ground
    energy is concave in H, E_Middle - E_Left >= ``barrier``.
    """
    if n_proton < 2:
        raise ValidationError("a Left/Middle/Right toy set needs at least two protonic modes")
    left = toy_integrals(n_electron, n_proton, seed=seed, scale=scale, proton_site=0, well_depth=well_depth)
    right = replace(left, h1p=left.h1p[::-1, ::-1].copy(), gep=left.gep[::-1, ::-1].copy())
    middle = replace(left, h1p=0.5 * (left.h1p + right.h1p) + barrier * np.eye(n_proton),
                     gep=0.5 * (left.gep + right.gep))
    return {name: replace(ints, meta={"toy_seed": seed, "config": name})
            for name, ints in (("left", left), ("middle", middle), ("right", right))}
