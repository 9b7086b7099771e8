"""Steady-state behaviors of open detailed-balanced Markov processes and circuits.

The behavior of an open system with steady-state operator ``A`` (the
Hamiltonian for a Markov process, the Laplacian for a circuit) is the
linear relation

    {(i^* p, I, o^* p, O) : A p + i_* I - o_* O = 0}

between input values and flows and output values and flows.  It is computed
as the image of ``ker [A | i_* | -o_*]`` under the boundary projection.

A circuit edge with conductance ``c`` from ``s`` to ``t`` contributes ``c/2``
to the symmetric conductance between ``s`` and ``t``; a physical resistor is
a pair of opposite edges (see :meth:`Circuit.from_resistors`).  With that
convention the Laplacian of the circuit attached to a detailed-balanced
process is exactly ``H diag(q)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DetailedBalanceError
from .finset import Cospan, FinSet, disjoint_union, tensor_cospans
from .linrel import LinRel, Subspace, compose_rel, dagger, direct_sum, equal_rel, from_graph_of_map, null_space
from .open_markov import OpenDetailedBalanced, OpenMarkov

Behavior = LinRel


@dataclass(frozen=True)
class CircuitEdge:
    id: str
    source: str
    target: str
    conductance: float


@dataclass(frozen=True, eq=False)
class Circuit:
    cospan: Cospan
    edges: tuple[CircuitEdge, ...]

    def __post_init__(self):
        for e in self.edges:
            if not e.conductance > 0:
                raise ValueError(f"edge {e.id!r} has non-positive conductance")
            if e.source not in self.cospan.apex or e.target not in self.cospan.apex:
                raise ValueError(f"edge {e.id!r} has an endpoint outside the node set")

    @property
    def nodes(self) -> FinSet:
        return self.cospan.apex

    @classmethod
    def from_resistors(cls, cospan: Cospan, resistors: Iterable[tuple[str, str, float]]) -> "Circuit":
        """One physical resistor per triple, stored as two opposite edges."""
        edges = []
        for k, (a, b, c) in enumerate(resistors):
            edges.append(CircuitEdge(f"r{k}+", a, b, float(c)))
            edges.append(CircuitEdge(f"r{k}-", b, a, float(c)))
        return cls(cospan, tuple(edges))

    def laplacian(self) -> np.ndarray:
        """Symmetric matrix L with L @ phi = net current injected at each node, negated."""
        n = len(self.nodes)
        c = np.zeros((n, n))
        for e in self.edges:
            s, t = self.nodes.index(e.source), self.nodes.index(e.target)
            if s != t:
                c[t, s] += e.conductance
        c = 0.5 * (c + c.T)
        return c - np.diag(c.sum(axis=1))


def to_circuit(m: OpenDetailedBalanced, tol: float = 1e-9) -> Circuit:
    """Attach conductance ``r_e q_source(e)`` to every edge of the process."""
    h = m.hamiltonian
    flux = h * m.q[None, :]
    np.fill_diagonal(flux, 0.0)
    scale = float(np.abs(flux).max(initial=0.0))
    if scale and np.abs(flux - flux.T).max() > tol * scale:
        raise DetailedBalanceError("conductances are not symmetric: q is not detailed balanced")
    edges = tuple(
        CircuitEdge(e.id, e.source, e.target, e.rate * float(m.q[m.states.index(e.source)]))
        for e in m.process.edges
    )
    return Circuit(m.cospan, edges)


def power_functional(c: Circuit, phi: np.ndarray) -> float:
    """``1/2 sum_e c_e (phi_s - phi_t)^2``; for resistor pairs, the physical power."""
    phi = np.asarray(phi, dtype=float)
    total = 0.0
    for e in c.edges:
        d = phi[c.nodes.index(e.source)] - phi[c.nodes.index(e.target)]
        total += 0.5 * e.conductance * d * d
    return total


def steady_relation(operator: np.ndarray, cospan: Cospan, tol: float = 1e-9) -> LinRel:
    """Relation ``{(i^*v, I, o^*v, O) : operator v + i_* I - o_* O = 0}``."""
    n = len(cospan.apex)
    nx, ny = len(cospan.left), len(cospan.right)
    ipush = cospan.in_leg.matrix()
    opush = cospan.out_leg.matrix()
    system = np.hstack([np.asarray(operator, dtype=float), ipush, -opush])
    ker = null_space(system, tol) if n else np.eye(nx + ny)
    # boundary projection (i^* v, I, o^* v, O)
    proj = np.zeros((2 * nx + 2 * ny, n + nx + ny))
    proj[:nx, :n] = ipush.T
    proj[nx : 2 * nx, n : n + nx] = np.eye(nx)
    proj[2 * nx : 2 * nx + ny, :n] = opush.T
    proj[2 * nx + ny :, n + nx :] = np.eye(ny)
    return LinRel(2 * nx, 2 * ny, Subspace.from_spanning(proj @ ker, 2 * nx + 2 * ny, tol, scale=1.0))


def blackbox_markov(m: OpenMarkov, tol: float = 1e-9) -> Behavior:
    return steady_relation(m.hamiltonian, m.cospan, tol)


def blackbox_circuit(c: Circuit, tol: float = 1e-9) -> Behavior:
    return steady_relation(c.laplacian(), c.cospan, tol)


def alpha(q_boundary: np.ndarray) -> LinRel:
    """Scale potentials by ``q`` and leave currents alone: ``(phi, I) -> (q phi, I)``."""
    q = np.asarray(q_boundary, dtype=float)
    if (q <= 0).any():
        raise ValueError("alpha needs strictly positive q")
    n = q.size
    a = np.zeros((2 * n, 2 * n))
    a[:n, :n] = np.diag(q)
    a[n:, n:] = np.eye(n)
    return from_graph_of_map(a)


def naturality_sides(m: OpenDetailedBalanced, tol: float = 1e-9) -> tuple[LinRel, LinRel]:
    """Return the black box of ``m`` and ``alpha_Y . box K(m) . alpha_X^-1``."""
    qx = m.q[m.cospan.in_leg.indices]
    qy = m.q[m.cospan.out_leg.indices]
    circuit_box = blackbox_circuit(to_circuit(m), tol)
    via_circuit = compose_rel(compose_rel(dagger(alpha(qx)), circuit_box, tol), alpha(qy), tol)
    return blackbox_markov(m, tol), via_circuit


def check_naturality(m: OpenDetailedBalanced, tol: float = 1e-8) -> bool:
    lhs, rhs = naturality_sides(m)
    return equal_rel(lhs, rhs, tol)


def tensor_circuits(c1: Circuit, c2: Circuit) -> Circuit:
    cospan, a1, a2 = tensor_cospans(c1.cospan, c2.cospan)
    _, l1, l2 = disjoint_union(FinSet(e.id for e in c1.edges), FinSet(e.id for e in c2.edges))
    edges = [CircuitEdge(l1(e.id), a1(e.source), a1(e.target), e.conductance) for e in c1.edges]
    edges += [CircuitEdge(l2(e.id), a2(e.source), a2(e.target), e.conductance) for e in c2.edges]
    return Circuit(cospan, tuple(edges))


def _shuffle(n1: int, n2: int) -> np.ndarray:
    """Positions taking (v1, F1, v2, F2) to (v1, v2, F1, F2)."""
    blocks = [np.arange(n1), 2 * n1 + np.arange(n2), n1 + np.arange(n1), 2 * n1 + n2 + np.arange(n2)]
    return np.concatenate(blocks).astype(np.intp)


def tensor_behaviors(b1: Behavior, b2: Behavior) -> Behavior:
    """Direct sum of two behaviors, reordered to match the coordinates of a tensor product.

    ``direct_sum`` stacks whole blocks (values and flows of the first system,
    then of the second); the black box of a tensor product lists all values
    first and then all flows.
    """
    s = direct_sum(b1, b2)
    nx1, nx2 = b1.dom_dim // 2, b2.dom_dim // 2
    ny1, ny2 = b1.cod_dim // 2, b2.cod_dim // 2
    perm = np.concatenate([_shuffle(nx1, nx2), s.dom_dim + _shuffle(ny1, ny2)])
    return LinRel(s.dom_dim, s.cod_dim, Subspace(s.space.ambient_dim, s.basis[perm]))
