"""Exact linear algebra over Z and finitely generated abelian groups.

Everything in this module is integer-exact: matrices are numpy arrays with
``dtype=object`` holding Python ints, so arbitrary precision is automatic.
A group is presented as Z^n modulo the column span of a relation matrix;
subgroups of a presented group are integer lattices between the relation
lattice and Z^n, canonicalized by a column Hermite form.  Smith normal form
returns the full transform pair (U, D, V) with U M V = D exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "imat",
    "izeros",
    "ieye",
    "smith_normal_form",
    "hermite_column_form",
    "lattice_canonical",
    "solve_integer",
    "kernel_basis",
    "integer_rank",
    "lattice_sum",
    "lattice_intersect",
    "lattice_contains",
    "FGAbelianGroup",
    "GroupMap",
    "Subquotient",
    "subquotient",
    "describe",
    "free_group",
    "trivial_group",
    "zero_map",
]


# ---------------------------------------------------------------------------
# integer matrices

def imat(data) -> np.ndarray:
    """Build an exact integer matrix (2d object array of Python ints)."""
    a = np.array(data, dtype=object)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if a.size else a.reshape(0, 1)
    for x in a.flat:
        if not isinstance(x, (int, np.integer)):
            raise TypeError(f"non-integer entry {x!r}")
    return np.vectorize(int, otypes=[object])(a) if a.size else a


def izeros(n: int, m: int) -> np.ndarray:
    return np.zeros((n, m), dtype=object)


def ieye(n: int) -> np.ndarray:
    return np.eye(n, dtype=object)


def _as_imat(m) -> np.ndarray:
    if isinstance(m, np.ndarray) and m.dtype == object and m.ndim == 2:
        return m
    return imat(m)


# ---------------------------------------------------------------------------
# Smith normal form

def smith_normal_form(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (U, D, V) with U m V = D, U and V unimodular, D diagonal.

    Diagonal entries are nonnegative and each divides the next.  Exact over
    Python ints; no size limits.
    """
    d = _as_imat(m).copy()
    rows, cols = d.shape
    u = ieye(rows)
    v = ieye(cols)

    def swap_rows(i, j):
        d[[i, j], :] = d[[j, i], :]
        u[[i, j], :] = u[[j, i], :]

    def swap_cols(i, j):
        d[:, [i, j]] = d[:, [j, i]]
        v[:, [i, j]] = v[:, [j, i]]

    def add_row(src, dst, c):  # row[dst] += c * row[src]
        d[dst, :] += c * d[src, :]
        u[dst, :] += c * u[src, :]

    def add_col(src, dst, c):
        d[:, dst] += c * d[:, src]
        v[:, dst] += c * v[:, src]

    t = 0
    while t < min(rows, cols):
        # pick the nonzero pivot of least magnitude in the remaining block
        pivot = None
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                a = d[i, j]
                if a != 0 and (best is None or abs(a) < best):
                    best = abs(a)
                    pivot = (i, j)
        if pivot is None:
            break
        swap_rows(t, pivot[0])
        swap_cols(t, pivot[1])

        dirty = False
        for i in range(t + 1, rows):
            if d[i, t] != 0:
                q = d[i, t] // d[t, t]
                add_row(t, i, -q)
                if d[i, t] != 0:
                    dirty = True
        for j in range(t + 1, cols):
            if d[t, j] != 0:
                q = d[t, j] // d[t, t]
                add_col(t, j, -q)
                if d[t, j] != 0:
                    dirty = True
        if dirty:
            continue  # remainder became the new smallest entry; re-pivot

        # divisibility sweep: pivot must divide the whole remaining block
        offender = None
        for i in range(t + 1, rows):
            for j in range(t + 1, cols):
                if d[i, j] % d[t, t] != 0:
                    offender = i
                    break
            if offender is not None:
                break
        if offender is not None:
            add_row(offender, t, 1)
            continue

        if d[t, t] < 0:
            d[t, :] = -d[t, :]
            u[t, :] = -u[t, :]
        t += 1

    return u, d, v


def integer_rank(m) -> int:
    m = _as_imat(m)
    if m.size == 0:
        return 0
    _, d, _ = smith_normal_form(m)
    return sum(1 for i in range(min(d.shape)) if d[i, i] != 0)


def hermite_column_form(m) -> np.ndarray:
    """Column-style Hermite normal form (canonical basis of the column lattice).

    Returns an n x r matrix (r = lattice rank) with positive pivots, entries
    to the right of each pivot reduced into [0, pivot).  Unique for a given
    column lattice, so usable as a canonical form.
    """
    a = _as_imat(m).copy()
    n, k = a.shape
    if k == 0:
        return a.reshape(n, 0)
    row = 0
    col = 0
    while row < n and col < k:
        # gcd-sweep columns col..k-1 on this row
        while True:
            nz = [j for j in range(col, k) if a[row, j] != 0]
            if not nz:
                break
            j0 = min(nz, key=lambda j: abs(a[row, j]))
            if j0 != col:
                a[:, [col, j0]] = a[:, [j0, col]]
            done = True
            for j in range(col + 1, k):
                if a[row, j] != 0:
                    q = a[row, j] // a[row, col]
                    a[:, j] -= q * a[:, col]
                    if a[row, j] != 0:
                        done = False
            if done:
                break
        if a[row, col] != 0:
            if a[row, col] < 0:
                a[:, col] = -a[:, col]
            # reduce earlier columns against this pivot
            for j in range(col):
                q = a[row, j] // a[row, col]
                a[:, j] -= q * a[:, col]
            col += 1
        row += 1
    # drop zero columns (all beyond `col` are zero by construction)
    return a[:, :col]


def lattice_canonical(m) -> np.ndarray:
    """Canonical generator matrix of the integer column lattice of ``m``."""
    return hermite_column_form(m)


def solve_integer(m, b):
    """Solve m x = b over the integers; return x or None.

    ``b`` may be a vector or an n x s matrix (solved columnwise; None if any
    column has no solution).
    """
    m = _as_imat(m)
    bb = _as_imat(b)
    u, d, v = smith_normal_form(m)
    c = u @ bb
    n, k = d.shape
    s = bb.shape[1]
    y = izeros(k, s)
    for jcol in range(s):
        for i in range(min(n, k)):
            di = d[i, i]
            if di == 0:
                if c[i, jcol] != 0:
                    return None
            else:
                if c[i, jcol] % di != 0:
                    return None
                y[i, jcol] = c[i, jcol] // di
        for i in range(min(n, k), n):
            if c[i, jcol] != 0:
                return None
    return v @ y  # always k x s, even for vector-shaped b


def kernel_basis(m) -> np.ndarray:
    """Integer basis of {x : m x = 0}, as columns (possibly zero columns -> none)."""
    m = _as_imat(m)
    n, k = m.shape
    if k == 0:
        return izeros(k, 0)
    _, d, v = smith_normal_form(m)
    r = sum(1 for i in range(min(n, k)) if d[i, i] != 0)
    return v[:, r:]


# ---------------------------------------------------------------------------
# lattice calculus (sublattices of Z^n given by generator columns)

def lattice_sum(a, b) -> np.ndarray:
    a, b = _as_imat(a), _as_imat(b)
    return lattice_canonical(np.concatenate([a, b], axis=1))


def lattice_contains(lat, x) -> bool:
    lat = _as_imat(lat)
    if lat.shape[1] == 0:
        xx = _as_imat(x)
        return bool(np.all(xx == 0))
    return solve_integer(lat, x) is not None


def lattice_intersect(a, b) -> np.ndarray:
    """Basis of the intersection of two column lattices in the same Z^n."""
    a, b = _as_imat(a), _as_imat(b)
    if a.shape[1] == 0 or b.shape[1] == 0:
        return izeros(a.shape[0], 0)
    stacked = np.concatenate([a, -b], axis=1)
    ker = kernel_basis(stacked)
    if ker.shape[1] == 0:
        return izeros(a.shape[0], 0)
    return lattice_canonical(a @ ker[: a.shape[1], :])


# ---------------------------------------------------------------------------
# presented groups

@dataclass(frozen=True)
class FGAbelianGroup:
    """Z^ngens modulo the column span of ``relations`` (ngens x nrel)."""

    ngens: int
    relations: np.ndarray = None  # type: ignore[assignment]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        rel = self.relations
        rel = izeros(self.ngens, 0) if rel is None else _as_imat(rel)
        if rel.shape[0] != self.ngens:
            raise ValueError("relation matrix has wrong number of rows")
        object.__setattr__(self, "relations", rel)
        if self.labels is not None and len(self.labels) != self.ngens:
            raise ValueError("need one label per generator")
        u, d, v = smith_normal_form(rel)
        object.__setattr__(self, "_snf", (u, d, v))

    # -- structure ---------------------------------------------------------
    @property
    def rank(self) -> int:
        _, d, _ = self._snf
        r = sum(1 for i in range(min(d.shape)) if d[i, i] != 0)
        return self.ngens - r

    @property
    def torsion(self) -> tuple[int, ...]:
        _, d, _ = self._snf
        return tuple(
            int(d[i, i]) for i in range(min(d.shape)) if d[i, i] not in (0, 1)
        )

    def canonical(self) -> tuple[int, tuple[int, ...]]:
        return (self.rank, self.torsion)

    @property
    def is_trivial(self) -> bool:
        return self.rank == 0 and not self.torsion

    def invariant_factors(self) -> tuple[int, ...]:
        """Nontrivial invariant factors d1 | d2 | ... (0 entries = free ranks)."""
        return self.torsion + (0,) * self.rank

    # -- elements ----------------------------------------------------------
    def zero(self) -> np.ndarray:
        return izeros(self.ngens, 1)[:, 0]

    def gen(self, i: int) -> np.ndarray:
        e = self.zero()
        e[i] = 1
        return e

    def reduce(self, x) -> np.ndarray:
        """Canonical coset representative of ``x``."""
        u, d, _ = self._snf
        xx = _as_imat(x).reshape(self.ngens)
        y = u @ xx
        for i in range(min(d.shape)):
            di = d[i, i]
            if di != 0:
                y[i] = y[i] % di
        # invert u exactly: u is unimodular, so solve u z = y
        z = solve_integer(u, y.reshape(-1, 1))
        return z[:, 0]

    def is_zero(self, x) -> bool:
        return lattice_contains(self.relations, _as_imat(x).reshape(-1, 1))

    def equal(self, x, y) -> bool:
        return self.is_zero(_as_imat(x).reshape(self.ngens) - _as_imat(y).reshape(self.ngens))

    def __repr__(self) -> str:  # e.g. Z^2 + Z/2
        return f"FGAbelianGroup({describe(self.canonical())})"


def describe(canonical: tuple[int, tuple[int, ...]]) -> str:
    rank, tors = canonical
    parts = []
    if rank == 1:
        parts.append("Z")
    elif rank > 1:
        parts.append(f"Z^{rank}")
    parts.extend(f"Z/{t}" for t in tors)
    return " + ".join(parts) if parts else "0"


def free_group(n: int, labels=None) -> FGAbelianGroup:
    return FGAbelianGroup(n, izeros(n, 0), tuple(labels) if labels else None)


def trivial_group() -> FGAbelianGroup:
    return FGAbelianGroup(0, izeros(0, 0))


# ---------------------------------------------------------------------------
# homomorphisms

@dataclass
class GroupMap:
    """Homomorphism between presented groups, as a matrix on generators."""

    src: FGAbelianGroup
    dst: FGAbelianGroup
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.matrix = _as_imat(self.matrix)
        if self.matrix.shape != (self.dst.ngens, self.src.ngens):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"dst ngens {self.dst.ngens} x src ngens {self.src.ngens}"
            )
        # well-defined: relations of src must land in the relation lattice of dst
        img_rel = self.matrix @ self.src.relations
        for j in range(img_rel.shape[1]):
            if not self.dst.is_zero(img_rel[:, j]):
                raise ValueError("map does not respect source relations")

    def __call__(self, x) -> np.ndarray:
        return self.dst.reduce(self.matrix @ _as_imat(x).reshape(-1, 1))

    def compose(self, other: "GroupMap") -> "GroupMap":
        """self o other."""
        return GroupMap(other.src, self.dst, self.matrix @ other.matrix)

    # -- lattices ----------------------------------------------------------
    def image_lattice(self) -> np.ndarray:
        """Full preimage-in-Z^n lattice of the image subgroup of dst."""
        return lattice_sum(self.matrix, self.dst.relations)

    def kernel_lattice(self) -> np.ndarray:
        """Lattice of {x in Z^src : f(x) = 0 in dst} (contains src relations)."""
        return self.preimage_lattice(self.dst.relations)

    def preimage_lattice(self, lat_dst) -> np.ndarray:
        lat = lattice_sum(lat_dst, self.dst.relations)
        a = self.matrix
        stacked = np.concatenate([a, -lat], axis=1) if lat.shape[1] else a
        ker = kernel_basis(stacked)
        xpart = ker[: a.shape[1], :] if ker.shape[1] else izeros(a.shape[1], 0)
        return lattice_sum(xpart, self.src.relations)

    def is_zero_map(self) -> bool:
        for j in range(self.src.ngens):
            if not self.dst.is_zero(self.matrix[:, j]):
                return False
        return True


def zero_map(src: FGAbelianGroup, dst: FGAbelianGroup) -> GroupMap:
    return GroupMap(src, dst, izeros(dst.ngens, src.ngens))


# ---------------------------------------------------------------------------
# subquotients

@dataclass
class Subquotient:
    """S / Q for lattices Q <= S inside an ambient presented group.

    ``group`` is a presentation of the subquotient; ``basis`` lifts its
    generators to ambient coordinates; ``project`` maps an ambient vector
    lying in S to coordinates of ``group``.
    """

    ambient: FGAbelianGroup
    sub_lattice: np.ndarray
    quot_lattice: np.ndarray
    group: FGAbelianGroup = field(init=False)
    basis: np.ndarray = field(init=False)

    def __post_init__(self):
        amb = self.ambient
        s_lat = lattice_sum(self.sub_lattice, amb.relations)
        q_lat = lattice_sum(self.quot_lattice, amb.relations)
        # Q must sit inside S
        for j in range(q_lat.shape[1]):
            if not lattice_contains(s_lat, q_lat[:, j].reshape(-1, 1)):
                raise ValueError("quotient lattice is not contained in subgroup lattice")
        self.sub_lattice = s_lat
        self.quot_lattice = q_lat
        basis = s_lat  # HNF basis columns are a lattice basis of S
        if q_lat.shape[1] == 0:
            rel = izeros(basis.shape[1], 0)
        else:
            rel = solve_integer(basis, q_lat)
            if rel is None:  # pragma: no cover - guarded above
                raise RuntimeError("containment check failed")
        self.group = FGAbelianGroup(basis.shape[1], rel)
        self.basis = basis

    def project(self, x) -> np.ndarray:
        """Coordinates of an ambient vector (must lie in S) in ``group``."""
        xx = _as_imat(x).reshape(-1, 1)
        c = solve_integer(self.basis, xx)
        if c is None:
            raise ValueError("vector does not lie in the subgroup")
        return self.group.reduce(c[:, 0])

    def lift(self, c) -> np.ndarray:
        return (self.basis @ _as_imat(c).reshape(-1, 1))[:, 0]

    def canonical(self):
        return self.group.canonical()


def subquotient(ambient: FGAbelianGroup, sub_gens, quot_gens) -> Subquotient:
    """Subgroup-mod-subgroup of a presented group; see :class:`Subquotient`."""
    return Subquotient(ambient, _as_imat(sub_gens), _as_imat(quot_gens))
