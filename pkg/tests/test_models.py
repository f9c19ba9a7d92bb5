"""Hopping models: Bloch matrices, real-space assembly, built-ins."""

import numpy as np
import pytest

from hotilab.models import (
    BUILTIN_MODELS,
    Geometry,
    HoppingModel,
    builtin_model,
    bulk_geometry,
    cube_geometry,
    instantiate,
    model_from_dict,
    model_to_dict,
    quarter_geometry,
    slab_geometry,
    wire_geometry,
)
from hotilab.patterns import Pattern, half_space

TOL = 1e-12


def test_ham1_has_seven_displacements():
    m = builtin_model("ham1", gamma=0.0)
    assert len(m.displacements()) == 7
    assert set(m.displacements()) == {
        (0, 0, 0),
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
    }
    # the perturbation only touches the onsite term
    assert len(builtin_model("ham1", gamma=0.7).displacements()) == 7


def test_ham1_bloch_eigenvalues_at_corners():
    m = builtin_model("ham1", gamma=0.0)
    e0 = np.linalg.eigvalsh(m.bloch((0.0, 0.0, 0.0)))
    assert np.allclose(e0, [-5, -5, 5, 5], atol=TOL)
    epi = np.linalg.eigvalsh(m.bloch((np.pi, np.pi, np.pi)))
    assert np.allclose(epi, [-1, -1, 1, 1], atol=TOL)


def test_bloch_hermitian_everywhere():
    rng = np.random.default_rng(0)
    for name in BUILTIN_MODELS:
        m = builtin_model(name)
        for _ in range(5):
            k = rng.uniform(-np.pi, np.pi, size=m.dimension)
            h = m.bloch(k)
            assert np.max(np.abs(h - h.conj().T)) < TOL


def test_bulk_models_are_gapped():
    # default gamma keeps the bulk gap open on a dense momentum sample
    rng = np.random.default_rng(1)
    for name in ("ham1", "ham2", "ham3"):
        m = builtin_model(name)
        gap = min(
            np.min(np.abs(np.linalg.eigvalsh(m.bloch(k))))
            for k in rng.uniform(-np.pi, np.pi, size=(200, 3))
        )
        assert gap > 0.1, f"{name} bulk gap collapsed: {gap}"


def test_chiral_models_have_flat_unit_bands():
    # h = [[0,u*],[u,0]] with u unitary: eigenvalues exactly +-1
    rng = np.random.default_rng(2)
    for name in ("chiral-quarter-uC", "chiral-quarter-uF"):
        m = builtin_model(name)
        assert m.chirality is not None
        for k in rng.uniform(-np.pi, np.pi, size=(20, 2)):
            h = m.bloch(k)
            e = np.linalg.eigvalsh(h)
            assert np.allclose(np.abs(e), 1.0, atol=1e-12)
            g = m.chirality
            assert np.max(np.abs(g @ h @ g + h)) < TOL


def test_missing_reverse_hopping_rejected():
    w = np.eye(2, dtype=complex)
    with pytest.raises(ValueError, match="reverse"):
        HoppingModel(1, 2, {(1,): w})


def test_non_adjoint_reverse_rejected():
    with pytest.raises(ValueError, match="adjoint"):
        HoppingModel(1, 1, {(1,): [[1.0]], (-1,): [[2.0]]})


def test_geometry_site_ordering_and_counts():
    g = quarter_geometry(4)
    s = g.sites()
    assert len(s) == 16
    assert s == sorted(s)  # lexicographic
    assert cube_geometry(3).sites() == sorted(cube_geometry(3).sites())
    assert len(cube_geometry(3).sites()) == 27
    slab = slab_geometry(3, 2, 5)
    assert slab.periodic_dirs == (0, 1)
    assert len(slab.sites()) == 5


def test_pattern_constraining_periodic_direction_rejected():
    with pytest.raises(ValueError, match="periodic"):
        Geometry(half_space((1, 0)), (None, 4))


def test_instantiate_on_fully_periodic_geometry_is_bloch():
    m = builtin_model("ham1")
    g = bulk_geometry(3)
    for k in [(0.0, 0.0, 0.0), (0.3, -1.1, 2.0)]:
        h = instantiate(m, g, k).dense()
        assert np.max(np.abs(h - m.bloch(k))) < TOL


def test_instantiate_box_too_small_rejected():
    m = builtin_model("ham1")
    with pytest.raises(ValueError, match="minimum"):
        instantiate(m, cube_geometry(2))


def test_instantiate_momentum_count_checked():
    m = builtin_model("ham1")
    with pytest.raises(ValueError, match="momentum"):
        instantiate(m, slab_geometry(3, 2, 9), (0.0,))


def test_real_space_matrix_against_direct_assembly():
    # independent dense assembly of a ham1 slab at fixed transverse momentum
    m = builtin_model("ham1", gamma=0.4)
    L = 7
    geo = slab_geometry(3, 2, L)
    k = (0.5, -0.9)
    h = instantiate(m, geo, k).dense()
    n = m.norb
    ref = np.zeros((L * n, L * n), dtype=complex)
    for z in range(L):
        for delta, w in m.hoppings.items():
            zt = z + delta[2]
            if not 0 <= zt < L:
                continue
            phase = np.exp(1j * (k[0] * delta[0] + k[1] * delta[1]))
            ref[zt * n:(zt + 1) * n, z * n:(z + 1) * n] += w * phase
    assert np.max(np.abs(h - ref)) < TOL


def test_wire_geometry_matches_quarter_cross_section():
    g = wire_geometry(3, 6)
    assert g.periodic_dirs == (2,)
    assert len(g.sites()) == 36


def test_model_json_roundtrip():
    m = builtin_model("ham3", gamma=0.35)
    d = model_to_dict(m)
    m2 = model_from_dict(d)
    assert set(m2.hoppings) == set(m.hoppings)
    for key, w in m.hoppings.items():
        assert np.max(np.abs(m2.hoppings[key] - w)) < TOL
    m3 = model_from_dict({"model": "ham3", "gamma": 0.35})
    for key, w in m.hoppings.items():
        assert np.max(np.abs(m3.hoppings[key] - w)) < TOL


def test_unknown_builtin_rejected():
    with pytest.raises(KeyError):
        builtin_model("nope")
