"""Open Markov processes: cospans decorated by Markov processes.

Two forms of the open master equation are supported.  In the fixed
boundary form the probabilities on boundary states are prescribed and the
internal states relax.  In the inflow/outflow form external flows ``I`` on
the inputs and ``O`` on the outputs drive

    dp/dt = H p + i_* I - o_* O.

Sign convention: a positive boundary flow is probability entering the
process from outside (``I``) or leaving it (``O``).
"""
from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DetailedBalanceError, InterfaceMismatchError, NotSteadyError
from .finset import Cospan, FinMap, FinSet, disjoint_union, glue, pushforward, tensor_cospans
from .linrel import null_space
from .markov import (
    Edge,
    MarkovProcess,
    _rk4,
    build_hamiltonian,
    check_detailed_balance,
    check_step,
)


@dataclass(frozen=True, eq=False)
class OpenMarkov:
    cospan: Cospan
    process: MarkovProcess

    def __post_init__(self):
        if self.cospan.apex != self.process.states:
            raise ValueError("cospan apex must equal the process state set, in the same order")

    @classmethod
    def closed(cls, process: MarkovProcess) -> "OpenMarkov":
        empty = FinSet()
        s = process.states
        return cls(Cospan(empty, s, empty, FinMap(empty, s, {}), FinMap(empty, s, {})), process)

    @classmethod
    def build(cls, states, edges, inputs: Mapping[str, str], outputs: Mapping[str, str]) -> "OpenMarkov":
        proc = MarkovProcess(states, edges)
        return cls(Cospan.from_legs(proc.states, inputs, outputs), proc)

    @property
    def states(self) -> FinSet:
        return self.process.states

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return build_hamiltonian(self.process).matrix

    def boundary_indices(self) -> np.ndarray:
        return np.array([self.states.index(s) for s in self.cospan.boundary()], dtype=np.intp)

    def internal_indices(self) -> np.ndarray:
        return np.array([self.states.index(s) for s in self.cospan.internal()], dtype=np.intp)


@dataclass(frozen=True, eq=False)
class OpenDetailedBalanced(OpenMarkov):
    """An open Markov process with a chosen detailed-balanced equilibrium ``q``."""

    q: np.ndarray = field(default=None)
    tol: float = 1e-9

    def __post_init__(self):
        super().__post_init__()
        q = np.asarray(self.q, dtype=float)
        if q.shape != (len(self.states),):
            raise ValueError("q must have one entry per state")
        if (q <= 0).any():
            raise DetailedBalanceError("equilibrium q must be strictly positive")
        if not check_detailed_balance(self.hamiltonian, q, self.tol):
            raise DetailedBalanceError("q is not a detailed-balanced equilibrium of the process")
        object.__setattr__(self, "q", q)

    @classmethod
    def from_open(cls, m: OpenMarkov, q, tol: float = 1e-9) -> "OpenDetailedBalanced":
        return cls(m.cospan, m.process, np.asarray(q, dtype=float), tol)

    @property
    def open(self) -> OpenMarkov:
        return OpenMarkov(self.cospan, self.process)


def _glue_edges(
    m1: MarkovProcess, m2: MarkovProcess, j1: FinMap, j2: FinMap
) -> list[Edge]:
    ids, l1, l2 = disjoint_union(FinSet(e.id for e in m1.edges), FinSet(e.id for e in m2.edges))
    edges = [Edge(l1(e.id), j1(e.source), j1(e.target), e.rate) for e in m1.edges]
    edges += [Edge(l2(e.id), j2(e.source), j2(e.target), e.rate) for e in m2.edges]
    return edges


def compose_open(m1: OpenMarkov, m2: OpenMarkov) -> OpenMarkov:
    """Glue the outputs of ``m1`` to the inputs of ``m2``.

    Edges are carried along the pushout maps; rates on edges that become
    parallel simply add up in the Hamiltonian.
    """
    cospan, po = glue(m1.cospan, m2.cospan)
    edges = _glue_edges(m1.process, m2.process, po.quot_left, po.quot_right)
    return OpenMarkov(cospan, MarkovProcess(po.apex, edges))


def _copair_equilibria(q1, q2, j1: FinMap, j2: FinMap, apex: FinSet, tol: float) -> np.ndarray:
    q = np.full(len(apex), np.nan)
    scale = max(float(np.max(q1, initial=0.0)), float(np.max(q2, initial=0.0)), 1e-300)
    for qs, j in ((q1, j1), (q2, j2)):
        for k, s in enumerate(j.domain):
            t = apex.index(j(s))
            if np.isnan(q[t]):
                q[t] = qs[k]
            elif abs(q[t] - qs[k]) > tol * scale:
                raise InterfaceMismatchError(
                    f"equilibria disagree at glued state {j(s)!r}: {q[t]} vs {qs[k]}"
                )
    return q


def compose_open_db(m1: OpenDetailedBalanced, m2: OpenDetailedBalanced, tol: float = 1e-9) -> OpenDetailedBalanced:
    cospan, po = glue(m1.cospan, m2.cospan)
    q = _copair_equilibria(m1.q, m2.q, po.quot_left, po.quot_right, po.apex, tol)
    edges = _glue_edges(m1.process, m2.process, po.quot_left, po.quot_right)
    return OpenDetailedBalanced(cospan, MarkovProcess(po.apex, edges), q, max(tol, m1.tol, m2.tol))


def tensor_open(m1: OpenMarkov, m2: OpenMarkov) -> OpenMarkov:
    cospan, a1, a2 = tensor_cospans(m1.cospan, m2.cospan)
    edges = _glue_edges(m1.process, m2.process, a1, a2)
    proc = MarkovProcess(cospan.apex, edges)
    if isinstance(m1, OpenDetailedBalanced) and isinstance(m2, OpenDetailedBalanced):
        return OpenDetailedBalanced(cospan, proc, np.concatenate([m1.q, m2.q]), max(m1.tol, m2.tol))
    return OpenMarkov(cospan, proc)


class FixedBoundarySolution(NamedTuple):
    p: np.ndarray
    degenerate: bool
    kernel: np.ndarray  # directions on the full state space leaving H_II p_I unchanged


def _boundary_vector(m: OpenMarkov, b) -> np.ndarray:
    bnd = m.cospan.boundary()
    if isinstance(b, Mapping):
        missing = [s for s in bnd if s not in b]
        if missing:
            raise ValueError(f"no boundary value given for {missing}")
        return np.array([float(b[s]) for s in bnd])
    b = np.asarray(b, dtype=float)
    if b.shape != (len(bnd),):
        raise ValueError(f"expected {len(bnd)} boundary values, got shape {b.shape}")
    return b


def solve_open_master_fixed_boundary(m: OpenMarkov, b, tol: float = 1e-10) -> FixedBoundarySolution:
    """Steady state with boundary probabilities clamped to ``b``.

    Solves ``H_II p_I = -H_IB b``.  When ``H_II`` is singular the
    least-squares solution is returned together with a basis of the
    solution set's directions and ``degenerate=True``.
    """
    h = m.hamiltonian
    bi, ii = m.boundary_indices(), m.internal_indices()
    bv = _boundary_vector(m, b)
    p = np.zeros(len(m.states))
    p[bi] = bv
    if ii.size == 0:
        return FixedBoundarySolution(p, False, np.zeros((len(p), 0)))
    h_ii = h[np.ix_(ii, ii)]
    rhs = -h[np.ix_(ii, bi)] @ bv
    ker = null_space(h_ii, tol)
    if ker.shape[1] == 0:
        p[ii] = np.linalg.solve(h_ii, rhs)
        return FixedBoundarySolution(p, False, np.zeros((len(p), 0)))
    sol, *_ = np.linalg.lstsq(h_ii, rhs, rcond=None)
    p[ii] = sol
    full = np.zeros((len(p), ker.shape[1]))
    full[ii] = ker
    return FixedBoundarySolution(p, True, full)


def master_rhs(m: OpenMarkov, p: np.ndarray, inflow, outflow) -> np.ndarray:
    """``H p + i_* I - o_* O``."""
    h = m.hamiltonian
    return (
        h @ p
        + pushforward(m.cospan.in_leg, np.asarray(inflow, dtype=float))
        - pushforward(m.cospan.out_leg, np.asarray(outflow, dtype=float))
    )


def open_master_step(m: OpenMarkov, p: np.ndarray, inflow, outflow, dt: float) -> np.ndarray:
    """One RK4 step of the inflow/outflow open master equation, flows held constant."""
    h = m.hamiltonian
    check_step(h, dt)
    drive = pushforward(m.cospan.in_leg, np.asarray(inflow, dtype=float)) - pushforward(
        m.cospan.out_leg, np.asarray(outflow, dtype=float)
    )
    return _rk4(lambda x: h @ x + drive, np.asarray(p, dtype=float), dt)


def evolve_fixed_boundary(m: OpenMarkov, p0: np.ndarray, t: float, dt: float) -> np.ndarray:
    """Integrate with the boundary probabilities held at their initial values."""
    h = m.hamiltonian.copy()
    h[m.boundary_indices(), :] = 0.0
    check_step(m.hamiltonian, dt)
    p = np.asarray(p0, dtype=float).copy()
    if t <= 0:
        return p
    n = max(1, math.ceil(t / dt - 1e-12))
    for _ in range(n):
        p = _rk4(lambda x: h @ x, p, t / n)
    return p


def boundary_flows(m: OpenMarkov, p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """External inflow needed at each boundary state to hold ``p`` steady.

    Equals ``-(H p)_b``; a negative value means probability leaves the
    process there.  Raises if an internal state is not steady.
    """
    h = m.hamiltonian
    p = np.asarray(p, dtype=float)
    hp = h @ p
    ii = m.internal_indices()
    scale = max(1.0, float(np.abs(h).max(initial=0.0)) * float(np.abs(p).max(initial=0.0)))
    if ii.size and np.abs(hp[ii]).max() > tol * scale:
        raise NotSteadyError(f"internal residual {np.abs(hp[ii]).max():.3e} exceeds tolerance")
    return -hp[m.boundary_indices()]


def q_from_energies(energies) -> np.ndarray:
    """Boltzmann weights ``exp(-E)`` at unit inverse temperature, unnormalised."""
    return np.exp(-np.asarray(energies, dtype=float))


def energies_from_q(q) -> np.ndarray:
    """``-ln q``, the inverse of :func:`q_from_energies`."""
    q = np.asarray(q, dtype=float)
    if (q <= 0).any():
        raise ValueError("q must be strictly positive")
    return -np.log(q)


def rates_from_energies(states, pairs, energies, barriers=None) -> list[Edge]:
    """Arrhenius-style rates satisfying detailed balance for the given energies.

    Each undirected pair (a, b) gets a barrier height (default
    ``max(E_a, E_b) + 1``) and rates ``exp(-(barrier - E_source))``.
    """
    st = list(states)
    e = dict(zip(st, np.asarray(energies, dtype=float)))
    edges = []
    for k, (a, b) in enumerate(pairs):
        top = max(e[a], e[b]) + 1.0 if barriers is None else float(barriers[k])
        edges.append(Edge(f"{a}>{b}", a, b, math.exp(-(top - e[a]))))
        edges.append(Edge(f"{b}>{a}", b, a, math.exp(-(top - e[b]))))
    return edges
