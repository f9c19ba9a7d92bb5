"""Twisted symmetry actions: cocycles, covariance, symmetrization."""

import numpy as np
import pytest

from hotilab.models import HoppingModel, builtin_model
from hotilab.patterns import PointGroupElement
from hotilab.symmetry import (
    BUILTIN_ACTIONS,
    SymmetryAction,
    builtin_action,
    check_covariance,
    symmetrize,
    verify_projective_relations,
)

TOL = 1e-12

DECLARED_PAIRS = [
    ("ham1", "inversion"),
    ("ham2", "C2T"),
    ("ham3", "C4T"),
    ("chiral-quarter-uC", "chiral"),
    ("chiral-quarter-uC", "mirror-diagonal"),
    ("chiral-quarter-uF", "chiral"),
    ("chiral-quarter-uF", "mirror-diagonal"),
]


def _random_model(rng, dim, norb, deltas):
    hops = {}
    for d in deltas:
        w = rng.normal(size=(norb, norb)) + 1j * rng.normal(size=(norb, norb))
        hops[d] = w
        hops[tuple(-x for x in d)] = w.conj().T
    on = rng.normal(size=(norb, norb)) + 1j * rng.normal(size=(norb, norb))
    hops[tuple([0] * dim)] = on + on.conj().T
    return HoppingModel(dim, norb, hops)


def test_builtin_actions_verify():
    for name in BUILTIN_ACTIONS:
        a = builtin_action(name)
        ok, defect = verify_projective_relations(a)
        assert ok, f"{name}: defect {defect}"


def test_time_reversal_squares_to_minus_one():
    a = builtin_action("T")
    assert abs(a.cocycle[("g", "g")] - (-1)) < 1e-9


def test_c4t_fourth_power_is_minus_one():
    # tau(g^j, g^k) = -1 exactly when the powers wrap past the identity
    a = builtin_action("C4T")
    labels = {0: "e", 1: "g", 2: "g^2", 3: "g^3"}
    for j in range(4):
        for k in range(4):
            tau = a.cocycle[(labels[j], labels[k])]
            want = -1.0 if j + k >= 4 else 1.0
            assert abs(tau - want) < 1e-9, (j, k, tau)
    assert all(a.antiunitary[labels[j]] == j % 2 for j in range(4))


def test_unitary_symmetries_have_trivial_cocycle():
    for name in ("inversion", "chiral", "mirror-diagonal", "C2T"):
        a = builtin_action(name)
        assert all(abs(t - 1) < 1e-9 for t in a.cocycle.values()), name


@pytest.mark.parametrize("mname,aname", DECLARED_PAIRS)
def test_declared_covariance(mname, aname):
    ok, defect = check_covariance(builtin_model(mname), builtin_action(aname), TOL)
    assert ok, f"{mname}/{aname}: defect {defect}"


def test_perturbation_selects_symmetry():
    # the gamma term of ham2 kills C4.T but keeps C2.T, and vice versa for ham3
    c4t, c2t = builtin_action("C4T"), builtin_action("C2T")
    assert not check_covariance(builtin_model("ham2", 0.5), c4t, TOL)[0]
    assert check_covariance(builtin_model("ham2", 0.0), c4t, TOL)[0]
    assert check_covariance(builtin_model("ham3", 0.5), c4t, TOL)[0]
    assert not check_covariance(builtin_model("ham1", 0.5), builtin_action("T"), TOL)[0]


def test_symmetrize_projects_and_is_idempotent():
    rng = np.random.default_rng(3)
    deltas = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0)]
    for name in ("inversion", "C2T", "C4T", "T"):
        a = builtin_action(name)
        m = _random_model(rng, 3, 4, deltas)
        p = symmetrize(m, a)
        ok, defect = check_covariance(p, a, 1e-10)
        assert ok, f"{name}: {defect}"
        p2 = symmetrize(p, a)
        for key, w in p.hoppings.items():
            assert np.max(np.abs(p2.hoppings[key] - w)) < 1e-10


def test_symmetrize_fixes_covariant_model():
    m = builtin_model("ham3")
    p = symmetrize(m, builtin_action("C4T"))
    for key, w in m.hoppings.items():
        assert np.max(np.abs(p.hoppings[key] - w)) < 1e-10


def test_symmetrize_group_order_cap():
    with pytest.raises(ValueError, match="cap"):
        SymmetryAction.cyclic(
            1025, np.eye(1, dtype=complex), PointGroupElement.identity(1)
        )


def test_non_projective_matrices_rejected():
    # doctor one unitary so products stop being proportional to table entries
    a = builtin_action("inversion")
    bad = dict(a.unitaries)
    bad["g"] = np.diag([1.0, 1.0, 1.0, 1.0 + 1e-3]).astype(complex)
    with pytest.raises(ValueError, match="proportional"):
        SymmetryAction(
            norb=a.norb, dimension=a.dimension, elements=a.elements,
            table=a.table, unitaries=bad, antiunitary=a.antiunitary,
            chirality=a.chirality, spatial=a.spatial,
        )


def test_covariance_detects_broken_model():
    m = builtin_model("ham1")
    hops = dict(m.hoppings)
    bump = np.zeros((4, 4), dtype=complex)
    bump[0, 1] = 1e-6  # odd under the orbital parity grading
    hops[(1, 0, 0)] = hops[(1, 0, 0)] + bump
    hops[(-1, 0, 0)] = hops[(-1, 0, 0)] + bump.conj().T
    broken = HoppingModel(3, 4, hops)
    ok, defect = check_covariance(broken, builtin_action("inversion"), TOL)
    assert not ok and defect > 1e-7
