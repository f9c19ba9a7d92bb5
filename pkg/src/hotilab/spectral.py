"""Eigensolvers and band-structure helpers with deterministic output.

Two routes to spectra: dense diagonalization (small matrices, canonically
phase-fixed) and a folded sparse solver that targets the eigenvalues of H
nearest zero by running ARPACK on H^2 with a seeded start vector, then
recovering signs and refined vectors from a Ritz step in the recovered
subspace.  Band scans attach per-region spatial weights, disentangling
degenerate clusters so weights are stable under basis ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import ceil

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .models import Geometry, HoppingModel, RealSpaceHamiltonian, instantiate

__all__ = [
    "DENSE_DIM_CAP",
    "dense_eigh",
    "folded_near_zero",
    "near_zero_states",
    "spectral_norm_bound",
    "RegionPartition",
    "wire_regions",
    "corner_regions",
    "BandData",
    "band_structure",
    "gap_at",
    "minimum_bulk_gap",
    "write_band_csv",
    "write_spectrum_csv",
]

DENSE_DIM_CAP = 16384
RESIDUAL_FACTOR = 1e-8  # residual tolerance relative to a norm bound of H
CLUSTER_TOL = 1e-7      # eigenvalue spacing treated as degenerate


def _phase_pivot(col: np.ndarray) -> int:
    """First index whose magnitude is within 1e-12 of the column max.

    Exact magnitude ties occur at symmetry-related sites; a tolerance makes
    the pivot stable against the one-ulp drift of a unit-phase rescale.
    """
    a = np.abs(col)
    return int(np.argmax(a >= a.max() * (1 - 1e-12)))


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the pivot component of each column real positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        z = out[_phase_pivot(out[:, j]), j]
        if abs(z) > 0:
            out[:, j] *= z.conjugate() / abs(z)
    return out


def dense_eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum, ascending, with canonical eigenvector phases."""
    if h.shape[0] > DENSE_DIM_CAP:
        raise ValueError(
            f"dense path capped at {DENSE_DIM_CAP}; use the folded solver"
        )
    h = h.toarray() if sp.issparse(h) else np.asarray(h)
    vals, vecs = np.linalg.eigh(h)
    return vals, _fix_phases(vecs)


def spectral_norm_bound(h) -> float:
    """Max absolute row sum: a cheap upper bound on the spectral norm."""
    if sp.issparse(h):
        return float(np.max(abs(h).sum(axis=1)))
    return float(np.max(np.sum(np.abs(h), axis=1)))


def folded_near_zero(
    h, nev: int, seed: int = 0, residual_factor: float = RESIDUAL_FACTOR
) -> tuple[np.ndarray, np.ndarray]:
    """``nev`` eigenpairs of sparse hermitian ``h`` nearest zero.

    ARPACK on H^2 (shift-invert about a point just below its spectrum) finds
    the folded subspace; a dense Ritz step of H within it restores signs and
    sharpens the pairs.  The start vector is seeded, so reruns are
    reproducible.  Raises if any residual exceeds residual_factor * bound(H).
    """
    h = sp.csr_matrix(h)
    n = h.shape[0]
    if nev >= n - 1:
        vals, vecs = dense_eigh(h)
        order = np.argsort(np.abs(vals), kind="stable")[:nev]
        order = order[np.argsort(vals[order], kind="stable")]
        return vals[order], vecs[:, order]
    scale = max(spectral_norm_bound(h), 1e-30)
    hsq = (h @ h).tocsc()
    rng = np.random.default_rng(seed)
    v0 = rng.normal(size=n)
    v0 /= np.linalg.norm(v0)
    sigma = -1e-6 * scale**2
    k_ask = min(max(nev + 4, nev), n - 2)  # small buffer stabilizes clusters
    vals2, vecs2 = spla.eigsh(hsq, k=k_ask, sigma=sigma, which="LM", v0=v0)
    # close the subspace under H: span{V, HV} is H-invariant even when a
    # degenerate H^2 multiplet was cut, since H(Hv) = lambda^2 v stays inside
    aug = np.hstack([vecs2, h @ vecs2])
    usvd, svd_vals, _ = np.linalg.svd(aug, full_matrices=False)
    basis = usvd[:, svd_vals > 1e-10 * svd_vals[0]]
    # Ritz step in the folded subspace: signed eigenvalues + refined vectors
    small = basis.conj().T @ (h @ basis)
    small = 0.5 * (small + small.conj().T)
    svals, svecs = np.linalg.eigh(small)
    ritz = basis @ svecs
    order = np.argsort(np.abs(svals), kind="stable")[:nev]
    order = order[np.argsort(svals[order], kind="stable")]
    vals, vecs = svals[order], _fix_phases(ritz[:, order])
    resid = np.linalg.norm(h @ vecs - vecs * vals[None, :], axis=0)
    if np.max(resid) > residual_factor * scale:
        raise RuntimeError(
            f"folded solver residual {np.max(resid):.3e} exceeds "
            f"{residual_factor:.1e} * {scale:.3e}"
        )
    return vals, vecs


def near_zero_states(
    h, nev: int, seed: int = 0, dense_cutoff: int = 2048
) -> tuple[np.ndarray, np.ndarray]:
    """Route to dense or folded solver by dimension; same contract."""
    n = h.shape[0]
    if n <= dense_cutoff or nev >= n - 1:
        vals, vecs = dense_eigh(h)
        order = np.argsort(np.abs(vals), kind="stable")[:nev]
        order = order[np.argsort(vals[order], kind="stable")]
        return vals[order], vecs[:, order]
    return folded_near_zero(h, nev, seed=seed)


# ---------------------------------------------------------------------------
# spatial regions

@dataclass
class RegionPartition:
    """Named site-index sets on a geometry, for spatial weights of states."""

    names: tuple[str, ...]
    site_indices: dict[str, np.ndarray]  # indices into geometry.sites()
    norb: int

    def projector_diagonal(self, name: str, dim: int) -> np.ndarray:
        d = np.zeros(dim)
        for s in self.site_indices[name]:
            d[s * self.norb:(s + 1) * self.norb] = 1.0
        return d

    def weights(self, vecs: np.ndarray) -> np.ndarray:
        """(#regions, #states) occupation weights of each column vector."""
        out = np.zeros((len(self.names), vecs.shape[1]))
        dens = np.abs(vecs) ** 2
        for i, name in enumerate(self.names):
            diag = self.projector_diagonal(name, vecs.shape[0])
            out[i] = diag @ dens
        return out


def _region_from_mask(sites, mask) -> np.ndarray:
    return np.array([i for i, x in enumerate(sites) if mask(x)], dtype=int)


def wire_regions(geometry: Geometry, norb: int) -> RegionPartition:
    """Four hinge squares (side ceil(L/4)), four faces, interior.

    The cross-section is the first two open directions; hinges sit at the
    corners of the box, faces along its edges minus the hinge squares.
    """
    d1, d2 = geometry.open_dirs[:2]
    L1, L2 = int(geometry.extents[d1]), int(geometry.extents[d2])
    c1, c2 = ceil(L1 / 4), ceil(L2 / 4)
    sites = geometry.sites()

    def lo1(x):
        return x[d1] < c1

    def hi1(x):
        return x[d1] >= L1 - c1

    def lo2(x):
        return x[d2] < c2

    def hi2(x):
        return x[d2] >= L2 - c2

    regions = {
        "hinge1": _region_from_mask(sites, lambda x: lo1(x) and lo2(x)),
        "hinge2": _region_from_mask(sites, lambda x: hi1(x) and lo2(x)),
        "hinge3": _region_from_mask(sites, lambda x: hi1(x) and hi2(x)),
        "hinge4": _region_from_mask(sites, lambda x: lo1(x) and hi2(x)),
        "face1": _region_from_mask(sites, lambda x: lo2(x) and not lo1(x) and not hi1(x)),
        "face2": _region_from_mask(sites, lambda x: hi1(x) and not lo2(x) and not hi2(x)),
        "face3": _region_from_mask(sites, lambda x: hi2(x) and not lo1(x) and not hi1(x)),
        "face4": _region_from_mask(sites, lambda x: lo1(x) and not lo2(x) and not hi2(x)),
    }
    used = set()
    for idx in regions.values():
        used.update(int(i) for i in idx)
    regions["interior"] = np.array(
        [i for i in range(len(sites)) if i not in used], dtype=int
    )
    names = tuple(regions)
    return RegionPartition(names, regions, norb)


def corner_regions(geometry: Geometry, norb: int) -> RegionPartition:
    """Quadrant split of a finite box; ``corner`` is the quadrant at the
    origin corner (where two pattern boundaries meet)."""
    opens = geometry.open_dirs
    sites = geometry.sites()
    halves = {i: int(geometry.extents[i]) / 2.0 for i in opens}

    def quadrant(x):
        return tuple(int(x[i] >= halves[i]) for i in opens)

    quads = sorted({quadrant(x) for x in sites})
    regions = {}
    for q in quads:
        label = "corner" if all(c == 0 for c in q) else "quad" + "".join(map(str, q))
        regions[label] = _region_from_mask(sites, lambda x, q=q: quadrant(x) == q)
    return RegionPartition(tuple(regions), regions, norb)


# ---------------------------------------------------------------------------
# band scans

@dataclass
class BandData:
    """Energies (and optional region weights) over a momentum path/grid."""

    momenta: np.ndarray            # (#k, m)
    energies: np.ndarray           # (#k, #bands)
    weights: np.ndarray | None     # (#k, #bands, #regions)
    region_names: tuple[str, ...]


def _disentangle_clusters(
    vals: np.ndarray, vecs: np.ndarray, partition: RegionPartition
) -> np.ndarray:
    """Rotate degenerate clusters to diagonalize a weighted region sum.

    Exactly degenerate states (symmetry-related hinge pairs) come out of the
    solver in arbitrary mixtures; diagonalizing sum_r c_r P_r with distinct
    coefficients inside each cluster pins a localized representative basis.
    """
    vecs = vecs.copy()
    n = len(vals)
    diag = np.zeros(vecs.shape[0])
    for i, name in enumerate(partition.names):
        diag += (i + 1.0) * partition.projector_diagonal(name, vecs.shape[0])
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and vals[stop] - vals[stop - 1] < CLUSTER_TOL:
            stop += 1
        if stop - start > 1:
            block = vecs[:, start:stop]
            w = block.conj().T @ (diag[:, None] * block)
            w = 0.5 * (w + w.conj().T)
            _, rot = np.linalg.eigh(w)
            vecs[:, start:stop] = block @ rot
        start = stop
    return vecs


def band_structure(
    model: HoppingModel,
    geometry: Geometry,
    momenta,
    partition: RegionPartition | None = None,
    window: int | None = None,
    seed: int = 0,
    dense_cutoff: int = 2048,
) -> BandData:
    """Spectrum along a momentum list; ``window`` keeps only that many
    states nearest zero energy (folded solver route for large systems)."""
    momenta = np.atleast_2d(np.asarray(momenta, dtype=float))
    energies = []
    weights = [] if partition is not None else None
    for k in momenta:
        ham = instantiate(model, geometry, tuple(k))
        if window is None:
            vals, vecs = dense_eigh(ham.matrix)
        else:
            vals, vecs = near_zero_states(
                ham.matrix, window, seed=seed, dense_cutoff=dense_cutoff
            )
        if partition is not None:
            vecs = _disentangle_clusters(vals, vecs, partition)
            weights.append(partition.weights(vecs).T)
        energies.append(vals)
    return BandData(
        momenta,
        np.array(energies),
        None if weights is None else np.array(weights),
        () if partition is None else partition.names,
    )


def gap_at(model: HoppingModel, k) -> float:
    """Distance of the Bloch spectrum from zero energy at one momentum."""
    return float(np.min(np.abs(np.linalg.eigvalsh(model.bloch(k)))))


def minimum_bulk_gap(model: HoppingModel, resolution: int = 21) -> float:
    """Min spectral gap over a uniform momentum grid."""
    axes = [np.linspace(-np.pi, np.pi, resolution, endpoint=False)] * model.dimension
    best = np.inf
    for k in product(*axes):
        best = min(best, gap_at(model, k))
    return float(best)


# ---------------------------------------------------------------------------
# CSV output

def write_band_csv(path, data: BandData) -> None:
    """Rows: k components, band index, energy, then one weight per region."""
    m = data.momenta.shape[1]
    cols = [f"k{i+1}" for i in range(m)] + ["band", "energy"]
    cols += [f"{name}_weight" for name in data.region_names]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for ik, k in enumerate(data.momenta):
            for ib in range(data.energies.shape[1]):
                row = [f"{x:.12g}" for x in k] + [
                    str(ib), f"{data.energies[ik, ib]:.12g}"
                ]
                if data.weights is not None:
                    row += [f"{w:.12g}" for w in data.weights[ik, ib]]
                fh.write(",".join(row) + "\n")


def write_spectrum_csv(path, energies) -> None:
    """Rows: state index, energy."""
    with open(path, "w") as fh:
        fh.write("index,energy\n")
        for i, e in enumerate(np.asarray(energies).ravel()):
            fh.write(f"{i},{e:.12g}\n")
