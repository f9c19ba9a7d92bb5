"""Projective (twisted) symmetry actions on hopping models.

An action assigns to each group element a point-group map on displacements,
an orbital unitary, an antiunitary flag, and a chirality sign (whether it
commutes or anticommutes with the Hamiltonian).  The U(1) cocycle is stored
extensionally - computed from the actual unitaries, never assumed - so
projective relations like (C4.T)^4 = -1 are facts about matrices, not inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import HoppingModel, s0, s1, s2, s3
from .patterns import PointGroupElement

__all__ = [
    "SymmetryAction",
    "builtin_action",
    "BUILTIN_ACTIONS",
    "check_covariance",
    "symmetrize",
    "verify_projective_relations",
]

UNITARITY_TOL = 1e-12
COVARIANCE_TOL = 1e-12
MAX_GROUP_ORDER = 1024


def _maybe_conj(m: np.ndarray, anti: int) -> np.ndarray:
    return m.conj() if anti else m


def _scalar_ratio(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> complex:
    """tau with a = tau*b, or raise if the matrices are not proportional."""
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < tol:
        raise ValueError("cannot take ratio against a zero matrix")
    tau = a[idx] / b[idx]
    if np.max(np.abs(a - tau * b)) > tol:
        raise ValueError("matrices are not proportional; not a projective rep")
    return complex(tau)


@dataclass
class SymmetryAction:
    """Finite twisted group action on a norb-orbital model in d dimensions."""

    norb: int
    dimension: int
    elements: tuple[str, ...]
    table: dict[tuple[str, str], str]
    unitaries: dict[str, np.ndarray]
    antiunitary: dict[str, int]
    chirality: dict[str, int]
    spatial: dict[str, PointGroupElement]
    cocycle: dict[tuple[str, str], complex] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if len(self.elements) > MAX_GROUP_ORDER:
            raise ValueError(f"group order capped at {MAX_GROUP_ORDER}")
        e = self.identity
        if np.max(np.abs(self.unitaries[e] - np.eye(self.norb))) > UNITARITY_TOL:
            raise ValueError("identity element must carry the identity matrix")
        if not self.cocycle:
            for g in self.elements:
                for h in self.elements:
                    prod = self.unitaries[g] @ _maybe_conj(
                        self.unitaries[h], self.antiunitary[g]
                    )
                    self.cocycle[(g, h)] = _scalar_ratio(
                        prod, self.unitaries[self.table[(g, h)]]
                    )

    @property
    def identity(self) -> str:
        for g in self.elements:
            if all(self.table[(g, h)] == h for h in self.elements):
                return g
        raise ValueError("no identity element in multiplication table")

    @property
    def order(self) -> int:
        return len(self.elements)

    @classmethod
    def cyclic(
        cls,
        n: int,
        unitary: np.ndarray,
        spatial: PointGroupElement,
        antiunitary: bool = False,
        chirality: bool = False,
        name: str = "",
    ) -> "SymmetryAction":
        """Action of Z_n generated by one element; powers are derived."""
        unitary = np.asarray(unitary, dtype=complex)
        norb = unitary.shape[0]
        labels = ["e"] + [f"g{'^' + str(j) if j > 1 else ''}" for j in range(1, n)]
        us = {labels[0]: np.eye(norb, dtype=complex)}
        phis = {labels[0]: 0}
        chis = {labels[0]: 0}
        sps = {labels[0]: PointGroupElement.identity(spatial.dimension)}
        for j in range(1, n):
            us[labels[j]] = unitary @ _maybe_conj(us[labels[j - 1]], antiunitary)
            phis[labels[j]] = (j * int(antiunitary)) % 2
            chis[labels[j]] = (j * int(chirality)) % 2
            sps[labels[j]] = spatial.compose(sps[labels[j - 1]])
        table = {
            (labels[j], labels[k]): labels[(j + k) % n]
            for j in range(n)
            for k in range(n)
        }
        return cls(
            norb=norb,
            dimension=spatial.dimension,
            elements=tuple(labels),
            table=table,
            unitaries=us,
            antiunitary=phis,
            chirality=chis,
            spatial=sps,
            name=name,
        )


def verify_projective_relations(action: SymmetryAction, tol: float = 1e-9):
    """Re-derive every product relation from the matrices; return (ok, defect).

    Checks unitarity, spatial/antiunitary/chirality homomorphism properties,
    |tau| = 1, the twisted cocycle identity
    tau(g,h) tau(gh,k) = tau(g,hk) tau(h,k)^sigma(g)  (sigma = conj if g is
    antiunitary), and that U_g conj^phi(g)(U_h) = tau(g,h) U_gh entrywise.
    """
    defect = 0.0
    for g in action.elements:
        u = action.unitaries[g]
        defect = max(defect, float(np.max(np.abs(u @ u.conj().T - np.eye(action.norb)))))
    for g in action.elements:
        for h in action.elements:
            gh = action.table[(g, h)]
            if (action.antiunitary[g] + action.antiunitary[h]) % 2 != action.antiunitary[gh]:
                return False, np.inf
            if (action.chirality[g] + action.chirality[h]) % 2 != action.chirality[gh]:
                return False, np.inf
            sgh = action.spatial[g].compose(action.spatial[h])
            if sgh.matrix != action.spatial[gh].matrix:
                return False, np.inf
            tau = action.cocycle[(g, h)]
            defect = max(defect, abs(abs(tau) - 1.0))
            prod = action.unitaries[g] @ _maybe_conj(
                action.unitaries[h], action.antiunitary[g]
            )
            defect = max(
                defect, float(np.max(np.abs(prod - tau * action.unitaries[gh])))
            )
    for g in action.elements:
        sig = action.antiunitary[g]
        for h in action.elements:
            for k in action.elements:
                lhs = action.cocycle[(g, h)] * action.cocycle[(action.table[(g, h)], k)]
                thk = action.cocycle[(h, k)]
                rhs = action.cocycle[(g, action.table[(h, k)])] * (
                    thk.conjugate() if sig else thk
                )
                defect = max(defect, abs(lhs - rhs))
    return defect <= tol, defect


def check_covariance(
    model: HoppingModel, action: SymmetryAction, tol: float = COVARIANCE_TOL
):
    """Max defect of U_g wtilde(delta) U_g^-1 = (-1)^c(g) w(S_g delta).

    wtilde is the entrywise conjugate when g is antiunitary.  Returns
    (ok, defect) over all elements and displacements.
    """
    if model.dimension != action.dimension or model.norb != action.norb:
        raise ValueError("model/action shape mismatch")
    deltas = set(model.hoppings)
    for g in action.elements:
        deltas |= {action.spatial[g].apply(d) for d in set(model.hoppings)}
    zero = np.zeros((model.norb, model.norb), dtype=complex)
    defect = 0.0
    for g in action.elements:
        u = action.unitaries[g]
        sign = -1.0 if action.chirality[g] else 1.0
        for d in deltas:
            w = model.hoppings.get(d, zero)
            target = model.hoppings.get(action.spatial[g].apply(d), zero)
            lhs = u @ _maybe_conj(w, action.antiunitary[g]) @ u.conj().T
            defect = max(defect, float(np.max(np.abs(lhs - sign * target))))
    return defect <= tol, defect


def symmetrize(model: HoppingModel, action: SymmetryAction) -> HoppingModel:
    """Group-average projection onto exactly covariant models.

    P(w)(delta) = 1/|G| sum_g (-1)^c(g) conj^phi(g)[U_g^dag w(S_g delta) U_g],
    the fixed-point transform of the covariance equation.  Idempotent, and
    the identity on already-covariant models.
    """
    if model.dimension != action.dimension or model.norb != action.norb:
        raise ValueError("model/action shape mismatch")
    deltas = set(model.hoppings)
    for g in action.elements:
        deltas |= {
            action.spatial[g].inverse().apply(d) for d in set(model.hoppings)
        }
    zero = np.zeros((model.norb, model.norb), dtype=complex)
    out = {}
    for d in deltas:
        acc = np.zeros((model.norb, model.norb), dtype=complex)
        for g in action.elements:
            u = action.unitaries[g]
            w = model.hoppings.get(action.spatial[g].apply(d), zero)
            term = _maybe_conj(u.conj().T @ w @ u, action.antiunitary[g])
            acc += -term if action.chirality[g] else term
        out[d] = acc / action.order
    return HoppingModel(
        model.dimension, model.norb, out, chirality=model.chirality,
        name=model.name + "+sym" if model.name else "",
    )


# ---------------------------------------------------------------------------
# built-in actions

def _pg(rows) -> PointGroupElement:
    return PointGroupElement(tuple(tuple(r) for r in rows))


def _inversion_action() -> SymmetryAction:
    return SymmetryAction.cyclic(
        2, np.kron(s0, s3), _pg([[-1, 0, 0], [0, -1, 0], [0, 0, -1]]),
        name="inversion",
    )


def _c2t_action() -> SymmetryAction:
    # C2 about the third axis composed with time reversal; squares to +1
    return SymmetryAction.cyclic(
        2, np.kron(s0, s1), _pg([[-1, 0, 0], [0, -1, 0], [0, 0, 1]]),
        antiunitary=True, name="C2T",
    )


def _c4t_action() -> SymmetryAction:
    # C4 about the third axis composed with time reversal; fourth power = -1
    u = np.kron(s0, s2 @ np.diag([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4)]))
    return SymmetryAction.cyclic(
        4, u, _pg([[0, -1, 0], [1, 0, 0], [0, 0, 1]]),
        antiunitary=True, name="C4T",
    )


def _time_reversal_action() -> SymmetryAction:
    return SymmetryAction.cyclic(
        2, np.kron(s0, s2), PointGroupElement.identity(3),
        antiunitary=True, name="T",
    )


def _chiral_action() -> SymmetryAction:
    return SymmetryAction.cyclic(
        2, np.kron(s3, s0), PointGroupElement.identity(2),
        chirality=True, name="chiral",
    )


def _mirror_diagonal_action() -> SymmetryAction:
    # swaps the two lattice directions; orbitals already sit in mirror eigenbasis
    return SymmetryAction.cyclic(
        2, np.kron(s0, s3), _pg([[0, 1], [1, 0]]), name="mirror-diagonal",
    )


BUILTIN_ACTIONS = ("inversion", "C2T", "C4T", "T", "chiral", "mirror-diagonal")


def builtin_action(name: str) -> SymmetryAction:
    """Named action matched to the built-in models' orbital bases."""
    factories = {
        "inversion": _inversion_action,
        "C2T": _c2t_action,
        "C4T": _c4t_action,
        "T": _time_reversal_action,
        "chiral": _chiral_action,
        "mirror-diagonal": _mirror_diagonal_action,
    }
    if name not in factories:
        raise KeyError(f"unknown action {name!r}; have {BUILTIN_ACTIONS}")
    return factories[name]()
