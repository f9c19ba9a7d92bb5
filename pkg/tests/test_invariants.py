"""Quantized diagnostics against independent oracles and frozen values."""

import numpy as np
import pytest

from hotilab.invariants import (
    CornerReport,
    _round_integer,
    bulk_corner_parity,
    chern_number_2d,
    chiral_offdiagonal_block,
    corner_index,
    face_layer_index,
    hinge_spectral_flow,
    mirror_block_windings,
    plane_bloch,
    trim_parities,
    winding_number,
)
from hotilab.models import HoppingModel, builtin_model, s0, s1, s2, s3
from hotilab.symmetry import builtin_action

TOL = 1e-9


def two_band(m):
    """h = sin k1 s1 + sin k2 s2 + (m + cos k1 + cos k2) s3."""
    hop = {
        (0, 0): m * s3,
        (1, 0): s1 / 2j + s3 / 2,
        (0, 1): s2 / 2j + s3 / 2,
    }
    hop[(-1, 0)] = hop[(1, 0)].conj().T
    hop[(0, -1)] = hop[(0, 1)].conj().T
    return HoppingModel(dimension=2, norb=2, hoppings=hop)


def d_field_degree(m, n=60):
    """Degree of the unit d-vector map via summed spherical triangle areas.

    Independent of the overlap-link construction: uses only the geometry of
    d(k) = (sin k1, sin k2, m + cos k1 + cos k2), and is exactly integer for
    any nonsingular configuration.
    """
    ks = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    d = np.stack([np.sin(k1), np.sin(k2), m + np.cos(k1) + np.cos(k2)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)

    def solid_angle(a, b, c):
        num = np.einsum("...i,...i->...", a, np.cross(b, c))
        den = (
            1.0
            + np.einsum("...i,...i->...", a, b)
            + np.einsum("...i,...i->...", b, c)
            + np.einsum("...i,...i->...", c, a)
        )
        return 2.0 * np.arctan2(num, den)

    a = d
    b = np.roll(d, -1, axis=0)
    c = np.roll(np.roll(d, -1, axis=0), -1, axis=1)
    e = np.roll(d, -1, axis=1)
    total = np.sum(solid_angle(a, b, c)) + np.sum(solid_angle(a, c, e))
    return int(round(total / (4 * np.pi)))


def test_chern_two_band_phases():
    assert chern_number_2d(two_band(-1.0), resolution=18) == -1
    assert chern_number_2d(two_band(1.0), resolution=18) == 1
    assert chern_number_2d(two_band(-3.0), resolution=18) == 0
    assert chern_number_2d(two_band(3.0), resolution=18) == 0


def test_chern_is_minus_d_field_degree():
    # occupied band is anti-aligned with d, so the two conventions differ
    # by a sign; pin the relation rather than each value separately
    for m in (-1.0, 1.0):
        assert chern_number_2d(two_band(m), resolution=18) == -d_field_degree(m)


def test_chern_gauge_invariance():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, _ = np.linalg.qr(a)
    base = two_band(-1.0).bloch
    assert chern_number_2d(lambda k: q.conj().T @ base(k) @ q, resolution=18) == -1


def test_chern_rejects_gapless():
    # m = -2 closes the gap at k = (pi, 0)
    with pytest.raises(RuntimeError):
        chern_number_2d(two_band(-2.0), resolution=18)


def test_plane_cherns_vanish_for_inversion_model():
    m = builtin_model("ham1")
    for axis in range(3):
        for value in (0.0, np.pi):
            assert chern_number_2d(plane_bloch(m, axis, value), resolution=12) == 0


def test_winding_of_phase_powers():
    assert winding_number(lambda k: np.array([[np.exp(1j * k)]])) == 1
    assert winding_number(lambda k: np.array([[np.exp(-2j * k)]])) == -2
    assert winding_number(lambda k: np.array([[2.0 + np.exp(1j * k)]])) == 0


def test_winding_rejects_vanishing_determinant():
    with pytest.raises(RuntimeError):
        winding_number(lambda k: np.array([[1.0 + np.exp(1j * k)]]))


def test_chiral_block_requires_grading():
    with pytest.raises(ValueError):
        chiral_offdiagonal_block(two_band(-1.0))


def test_mirror_windings_corner_model():
    m = builtin_model("chiral-quarter-uC")
    mirror = builtin_action("mirror-diagonal").unitaries["g"]
    assert mirror_block_windings(m, mirror) == (1, -1)


def test_mirror_windings_face_model():
    m = builtin_model("chiral-quarter-uF")
    mirror = builtin_action("mirror-diagonal").unitaries["g"]
    assert mirror_block_windings(m, mirror) == (0, 2)


def test_corner_index_quarter_model():
    rep = corner_index(builtin_model("chiral-quarter-uC"), side=16)
    assert rep.index == -1
    # one exact zero per corner of the finite box; only the origin one
    # passes the quadrant filter and contributes a chirality value
    assert len(rep.zero_energies) == 4
    assert np.max(np.abs(rep.zero_energies)) < 1e-8
    assert np.max(rep.corner_weights) > 0.9
    assert np.max(rep.box_weights) > 0.9
    assert list(rep.chirality_values) == pytest.approx([-1.0], abs=1e-8)
    assert rep.edge_gap == pytest.approx(np.sqrt(2) / 2, abs=1e-6)


def test_corner_index_requires_gapped_edges():
    # the face model has a flat band of edge zeros; its corner count is
    # not defined and the precondition must say so
    with pytest.raises(RuntimeError, match="edge spectrum gap"):
        corner_index(builtin_model("chiral-quarter-uF"), side=16)


def test_face_layer_index_is_minus_two():
    assert face_layer_index(side=16) == -2


def test_hinge_flow_antipodal_model():
    rep = hinge_spectral_flow(
        builtin_model("ham1"), side=12, nk=41, window=12, dense_cutoff=256
    )
    assert rep.flows == {"hinge1": 1, "hinge2": 0, "hinge3": -1, "hinge4": 0}
    assert rep.kirchhoff_sum == 0
    ks = sorted(c["k"] for c in rep.crossings)
    assert len(ks) == 2 and ks[0] == pytest.approx(-ks[1], abs=0.05)
    assert all(c["hinge"] is not None for c in rep.crossings)


def test_hinge_flow_fourfold_model_alternates():
    rep = hinge_spectral_flow(
        builtin_model("ham3"), side=12, nk=41, window=12, dense_cutoff=256
    )
    assert rep.flows == {"hinge1": 1, "hinge2": -1, "hinge3": 1, "hinge4": -1}
    assert rep.kirchhoff_sum == 0
    # all four crossings within one grid step of the zone boundary
    assert all(abs(abs(c["k"]) - np.pi) < 2 * np.pi / 41 for c in rep.crossings)


def test_hinge_flow_twofold_model():
    rep = hinge_spectral_flow(
        builtin_model("ham2"), side=14, nk=41, window=12, dense_cutoff=256
    )
    assert rep.flows == {"hinge1": 0, "hinge2": -1, "hinge3": 0, "hinge4": 1}
    assert rep.kirchhoff_sum == 0


def test_trim_parities_ham1():
    rep = trim_parities(builtin_model("ham1"), np.kron(s0, s3), chern_resolution=12)
    assert rep.per_point[(0.0, 0.0, 0.0)] == 2
    assert rep.per_point[(np.pi, np.pi, np.pi)] == 0
    assert rep.total == 14
    assert rep.cs_parity == 1
    assert all(c == 0 for c in rep.plane_cherns.values())


def atomic_model():
    return HoppingModel(
        dimension=3, norb=4, hoppings={(0, 0, 0): np.kron(s0, s3).astype(complex)}
    )


def test_trim_parities_atomic_model():
    rep = trim_parities(atomic_model(), np.kron(s0, s3), check_weak=False)
    assert rep.total == 16
    assert rep.cs_parity == 0


def test_trim_parity_stable_under_trivial_bands():
    base = builtin_model("ham1")
    atom = atomic_model()
    hoppings = {}
    for delta in set(base.hoppings) | set(atom.hoppings):
        wa = base.hoppings.get(delta, np.zeros((4, 4)))
        wb = atom.hoppings.get(delta, np.zeros((4, 4)))
        w = np.zeros((8, 8), dtype=complex)
        w[:4, :4], w[4:, 4:] = wa, wb
        hoppings[delta] = w
    stacked = HoppingModel(dimension=3, norb=8, hoppings=hoppings)
    par = np.zeros((8, 8), dtype=complex)
    par[:4, :4] = np.kron(s0, s3)
    par[4:, 4:] = np.kron(s0, s3)
    rep = trim_parities(stacked, par, check_weak=False)
    assert rep.total == 30
    assert rep.cs_parity == 1


def test_trim_requires_involutive_parity():
    with pytest.raises(ValueError, match="square to one"):
        trim_parities(builtin_model("ham1"), np.diag([1.0, 2.0, 1.0, 1.0]))


def test_bulk_corner_parity_rules():
    rep = bulk_corner_parity((1, 0, -1, 0), "inversion")
    assert rep.constraint_ok and rep.parity == 1
    rep = bulk_corner_parity((0, -1, 0, 1), "C2T")
    assert rep.constraint_ok and rep.parity == 1
    rep = bulk_corner_parity((1, -1, 1, -1), "C4T")
    assert rep.constraint_ok and rep.parity == 1
    rep = bulk_corner_parity((0, 0, 0, 0), "inversion")
    assert rep.constraint_ok and rep.parity == 0
    assert not bulk_corner_parity((1, 1, 1, 0), "inversion").constraint_ok
    assert not bulk_corner_parity((1, 0, -1, 0), "C4T").constraint_ok
    with pytest.raises(KeyError):
        bulk_corner_parity((0, 0, 0, 0), "C6T")


def test_round_integer_guard():
    assert _round_integer(1.95, "x") == 2
    with pytest.raises(RuntimeError, match="not within"):
        _round_integer(0.4, "x")
