"""Tight-binding hopping models and their Bloch / real-space matrices.

A hopping model is a finite displacement-indexed family of orbital matrices
w(delta) with w(-delta) = w(delta)^dagger.  Geometries pair a lattice pattern
with per-direction extents (open directions) and momentum directions
(periodic ones); instantiation truncates hops that leave the site set (open
boundary) and attaches Bloch phases along the periodic directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from .patterns import Pattern, half_space, quarter_pattern

__all__ = [
    "HoppingModel",
    "Geometry",
    "RealSpaceHamiltonian",
    "builtin_model",
    "BUILTIN_MODELS",
    "bulk_geometry",
    "slab_geometry",
    "wire_geometry",
    "quarter_geometry",
    "cube_geometry",
    "model_from_dict",
    "model_to_dict",
]

HERMITICITY_TOL = 1e-12

s0 = np.eye(2, dtype=complex)
s1 = np.array([[0, 1], [1, 0]], dtype=complex)
s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
s3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass
class HoppingModel:
    """w(delta) hopping matrices on Z^dimension with norb internal orbitals."""

    dimension: int
    norb: int
    hoppings: dict[tuple[int, ...], np.ndarray]
    chirality: np.ndarray | None = None  # grading operator for chiral models
    name: str = ""

    def __post_init__(self):
        clean: dict[tuple[int, ...], np.ndarray] = {}
        for delta, w in self.hoppings.items():
            d = tuple(int(x) for x in delta)
            if len(d) != self.dimension:
                raise ValueError(f"displacement {d} has wrong length")
            w = np.asarray(w, dtype=complex)
            if w.shape != (self.norb, self.norb):
                raise ValueError(f"hopping at {d} has wrong shape {w.shape}")
            if np.max(np.abs(w)) > 0:
                clean[d] = w
        for d, w in clean.items():
            md = tuple(-x for x in d)
            if md not in clean:
                raise ValueError(f"missing reverse hopping for {d}")
            if np.max(np.abs(clean[md] - w.conj().T)) > HERMITICITY_TOL:
                raise ValueError(f"w({md}) is not the adjoint of w({d})")
        self.hoppings = clean

    def displacements(self) -> list[tuple[int, ...]]:
        return sorted(self.hoppings)

    def range_per_direction(self) -> tuple[int, ...]:
        r = [0] * self.dimension
        for d in self.hoppings:
            for i, x in enumerate(d):
                r[i] = max(r[i], abs(x))
        return tuple(r)

    def bloch(self, k) -> np.ndarray:
        """Bloch matrix h(k) = sum_delta w(delta) exp(i k.delta)."""
        k = np.asarray(k, dtype=float)
        if k.shape != (self.dimension,):
            raise ValueError("momentum has wrong length")
        h = np.zeros((self.norb, self.norb), dtype=complex)
        for d, w in self.hoppings.items():
            h += w * np.exp(1j * float(np.dot(k, d)))
        return h


# ---------------------------------------------------------------------------
# geometries

@dataclass(frozen=True)
class Geometry:
    """Pattern + per-direction extents; None extent = periodic direction.

    Pattern normals must vanish along periodic directions (momentum must stay
    a good quantum number there).  Sites carry 0 in periodic coordinates and
    run lexicographically over the open ones.
    """

    pattern: Pattern
    extents: tuple[int | None, ...]

    def __post_init__(self):
        if len(self.extents) != self.pattern.dimension:
            raise ValueError("need one extent entry per direction")
        for n, _ in self.pattern.constraints:
            for j in self.periodic_dirs:
                if n[j] != 0:
                    raise ValueError(
                        f"pattern constrains periodic direction {j}: {n}"
                    )
        for j in self.open_dirs:
            if self.extents[j] is None or int(self.extents[j]) < 1:
                raise ValueError("open directions need positive extents")

    @property
    def dimension(self) -> int:
        return self.pattern.dimension

    @property
    def periodic_dirs(self) -> tuple[int, ...]:
        return tuple(i for i, L in enumerate(self.extents) if L is None)

    @property
    def open_dirs(self) -> tuple[int, ...]:
        return tuple(i for i, L in enumerate(self.extents) if L is not None)

    def sites(self) -> list[tuple[int, ...]]:
        """Pattern sites inside the box, lexicographic over open coordinates."""
        opens = self.open_dirs
        ranges = [range(int(self.extents[i])) for i in opens]
        out = []
        for coords in product(*ranges):
            x = [0] * self.dimension
            for i, c in zip(opens, coords):
                x[i] = c
            if self.pattern.contains(x):
                out.append(tuple(x))
        return out


def bulk_geometry(dimension: int) -> Geometry:
    return Geometry(Pattern(dimension), (None,) * dimension)


def slab_geometry(dimension: int, direction: int, depth: int) -> Geometry:
    """Half-space material confined to ``depth`` layers along one direction."""
    normal = tuple(1 if i == direction else 0 for i in range(dimension))
    extents = [None] * dimension
    extents[direction] = depth
    return Geometry(half_space(normal), tuple(extents))


def wire_geometry(dimension: int, side: int) -> Geometry:
    """Square cross-section in the (1,2)-plane, periodic along the rest."""
    if dimension < 3:
        raise ValueError("wires need at least three directions")
    extents = [side, side] + [None] * (dimension - 2)
    return Geometry(quarter_pattern(dimension), tuple(extents))


def quarter_geometry(side: int, dimension: int = 2) -> Geometry:
    extents = [side] * 2 + [None] * (dimension - 2)
    return Geometry(quarter_pattern(dimension), tuple(extents))


def cube_geometry(side: int) -> Geometry:
    cons = tuple(
        (tuple(1 if i == j else 0 for i in range(3)), 0) for j in range(3)
    )
    return Geometry(Pattern(3, cons), (side, side, side))


# ---------------------------------------------------------------------------
# real-space instantiation

@dataclass
class RealSpaceHamiltonian:
    """Assembled matrix on geometry sites (CSR), with site bookkeeping."""

    geometry: Geometry
    model: HoppingModel
    momentum: tuple[float, ...]
    sites: list[tuple[int, ...]]
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def site_of_index(self, idx: int) -> tuple[int, ...]:
        return self.sites[idx // self.model.norb]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def instantiate(
    model: HoppingModel, geometry: Geometry, momentum=()
) -> RealSpaceHamiltonian:
    """Real-space matrix on pattern-in-box sites with open truncation.

    Hops leaving the site set are dropped silently (sharp boundary); periodic
    directions contribute Bloch phases from ``momentum`` (one entry per
    periodic direction, ascending).
    """
    if model.dimension != geometry.dimension:
        raise ValueError("model/geometry dimension mismatch")
    per = geometry.periodic_dirs
    momentum = tuple(float(x) for x in momentum)
    if len(momentum) != len(per):
        raise ValueError(
            f"need {len(per)} momentum components, got {len(momentum)}"
        )
    ranges = model.range_per_direction()
    for i in geometry.open_dirs:
        need = 2 * ranges[i] + 1
        if int(geometry.extents[i]) < need:
            raise ValueError(
                f"extent {geometry.extents[i]} along direction {i} is below "
                f"the minimum {need} = 2*range+1 for this model"
            )
    sites = geometry.sites()
    index = {x: i for i, x in enumerate(sites)}
    n = model.norb
    kvec = dict(zip(per, momentum))

    rows, cols, vals = [], [], []
    for si, x in enumerate(sites):
        for delta, w in model.hoppings.items():
            y = list(x)
            phase = 0.0
            for j, dj in enumerate(delta):
                if j in kvec:
                    phase += kvec[j] * dj
                else:
                    y[j] += dj
            ti = index.get(tuple(y))
            if ti is None:
                continue  # open truncation
            amp = np.exp(1j * phase)
            for a in range(n):
                for b in range(n):
                    v = w[a, b] * amp
                    if v != 0:
                        # convention: <y,a| H |x,b> = w(delta)_{ab}
                        rows.append(ti * n + a)
                        cols.append(si * n + b)
                        vals.append(v)
    dim = len(sites) * n
    mat = sp.coo_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(dim, dim)
    ).tocsr()
    herm_defect = abs(mat - mat.conj().T).max() if dim else 0.0
    if herm_defect > 1e-9:
        raise AssertionError(f"assembled matrix not hermitian ({herm_defect})")
    return RealSpaceHamiltonian(geometry, model, momentum, sites, mat)


# ---------------------------------------------------------------------------
# built-in models

def _dirac_hoppings(gammas, gamma0, dimension):
    """Standard lattice regularization: sum_i G_i sin k_i + G_0 (2 + sum cos k_i)."""
    hop = {}
    zero = tuple([0] * dimension)
    hop[zero] = 2.0 * gamma0
    for i in range(dimension):
        e = tuple(1 if j == i else 0 for j in range(dimension))
        me = tuple(-x for x in e)
        hop[e] = gammas[i] / 2j + gamma0 / 2
        hop[me] = -gammas[i] / 2j + gamma0 / 2
    return hop


def _ham1(gamma: float) -> HoppingModel:
    g1 = np.kron(s3, s1)
    g2 = np.kron(s0, s2)
    g3 = np.kron(s2, s1)
    g0 = np.kron(s0, s3)
    gb = 0.5 * np.kron(s1 + s2 + s3, s0 + s3)
    hop = _dirac_hoppings([g1, g2, g3], g0, 3)
    hop[(0, 0, 0)] = hop[(0, 0, 0)] + gamma * gb
    return HoppingModel(3, 4, hop, name="ham1")


def _ham2(gamma: float) -> HoppingModel:
    g1, g2, g3 = np.kron(s1, s1), np.kron(s1, s2), np.kron(s1, s3)
    g0 = np.kron(s3, s0)
    gb = np.kron(s0, s1 + s2)
    hop = _dirac_hoppings([g1, g2, g3], g0, 3)
    hop[(0, 0, 0)] = hop[(0, 0, 0)] + gamma * gb
    return HoppingModel(3, 4, hop, name="ham2")


def _ham3(gamma: float) -> HoppingModel:
    g1, g2, g3 = np.kron(s1, s1), np.kron(s1, s2), np.kron(s1, s3)
    g0 = np.kron(s3, s0)
    gb = np.kron(s2, s0)
    hop = _dirac_hoppings([g1, g2, g3], g0, 3)
    # anisotropic mass (gamma/2)(cos k1 - cos k2): breaks plain C4, keeps C4.T
    for e, sign in [((1, 0, 0), 1), ((-1, 0, 0), 1), ((0, 1, 0), -1), ((0, -1, 0), -1)]:
        hop[e] = hop[e] + sign * (gamma / 2) * gb
    return HoppingModel(3, 4, hop, name="ham3")


def _chiral_from_unitary_hops(uhops: dict, dimension: int, name: str) -> HoppingModel:
    """h = [[0, u*],[u, 0]] for u given by displacement blocks (2x2)."""
    hop = {}
    deltas = set(uhops) | {tuple(-x for x in d) for d in uhops}
    for d in deltas:
        ud = uhops.get(d, np.zeros((2, 2), dtype=complex))
        umd = uhops.get(tuple(-x for x in d), np.zeros((2, 2), dtype=complex))
        w = np.zeros((4, 4), dtype=complex)
        w[:2, 2:] = umd.conj().T
        w[2:, :2] = ud
        hop[d] = w
    chirality = np.kron(s3, s0)
    return HoppingModel(dimension, 4, hop, chirality=chirality, name=name)


def _chiral_quarter_uc() -> HoppingModel:
    # u(k) = 1/2 [[-e^{-ik1}-e^{-ik2}, e^{-ik1}-e^{-ik2}],
    #             [ e^{ik1}-e^{ik2},   e^{ik1}+e^{ik2}]]
    uhops = {
        (1, 0): 0.5 * np.array([[0, 0], [1, 1]], dtype=complex),
        (-1, 0): 0.5 * np.array([[-1, 1], [0, 0]], dtype=complex),
        (0, 1): 0.5 * np.array([[0, 0], [-1, 1]], dtype=complex),
        (0, -1): 0.5 * np.array([[-1, -1], [0, 0]], dtype=complex),
    }
    return _chiral_from_unitary_hops(uhops, 2, "chiral-quarter-uC")


def _chiral_quarter_uf() -> HoppingModel:
    # u(k) = diag(e^{i(k1+k2)}, 1): mirror-even diagonal hop, mirror-odd flat
    uhops = {
        (1, 1): np.diag([1.0, 0.0]).astype(complex),
        (0, 0): np.diag([0.0, 1.0]).astype(complex),
    }
    return _chiral_from_unitary_hops(uhops, 2, "chiral-quarter-uF")


BUILTIN_MODELS = ("ham1", "ham2", "ham3", "chiral-quarter-uC", "chiral-quarter-uF")


def builtin_model(name: str, gamma: float = 0.5) -> HoppingModel:
    """Named model; ``gamma`` scales the symmetry-selecting perturbation."""
    if name == "ham1":
        return _ham1(gamma)
    if name == "ham2":
        return _ham2(gamma)
    if name == "ham3":
        return _ham3(gamma)
    if name == "chiral-quarter-uC":
        return _chiral_quarter_uc()
    if name == "chiral-quarter-uF":
        return _chiral_quarter_uf()
    raise KeyError(f"unknown model {name!r}; have {BUILTIN_MODELS}")


# ---------------------------------------------------------------------------
# serialization

def model_to_dict(m: HoppingModel) -> dict:
    return {
        "dimension": m.dimension,
        "norb": m.norb,
        "name": m.name,
        "hoppings": [
            {
                "delta": list(d),
                "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in w],
            }
            for d, w in sorted(m.hoppings.items())
        ],
    }


def model_from_dict(d: dict) -> HoppingModel:
    if "model" in d:  # builtin reference: {"model": "ham1", "gamma": 0.5}
        return builtin_model(d["model"], float(d.get("gamma", 0.5)))
    hops = {}
    for h in d["hoppings"]:
        w = np.array(
            [[complex(re, im) for re, im in row] for row in h["matrix"]],
            dtype=complex,
        )
        hops[tuple(h["delta"])] = w
    return HoppingModel(int(d["dimension"]), int(d["norb"]), hops, name=d.get("name", ""))
