"""Closed continuous-time Markov processes.

A process is a labelled directed multigraph with positive rates.  Its
Hamiltonian ``H`` is the infinitesimal stochastic matrix with
``H[i, j]`` the total rate of jumping from state ``j`` to state ``i`` and
diagonal entries making every column sum to zero, so that the master
equation reads ``dp/dt = H @ p``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, UnstableStepError
from .finset import FinSet
from .linrel import Subspace, null_space


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    target: str
    rate: float


class MarkovProcess:
    """States plus rate-labelled edges.  Self-loops and parallel edges are allowed."""

    def __init__(self, states: Iterable[str] | FinSet, edges: Iterable[Edge | tuple]):
        self.states = states if isinstance(states, FinSet) else FinSet(states)
        built = []
        for k, e in enumerate(edges):
            if not isinstance(e, Edge):
                if len(e) == 3:
                    e = Edge(f"e{k}", e[0], e[1], e[2])
                else:
                    e = Edge(*e)
            rate = float(e.rate)
            if not rate > 0 or not math.isfinite(rate):
                raise ValueError(f"edge {e.id!r} has non-positive or non-finite rate {e.rate!r}")
            for end in (e.source, e.target):
                if end not in self.states:
                    raise ValueError(f"edge {e.id!r} refers to unknown state {end!r}")
            built.append(Edge(str(e.id), e.source, e.target, rate))
        ids = [e.id for e in built]
        if len(set(ids)) != len(ids):
            raise ValueError("edge ids must be distinct")
        self.edges: tuple[Edge, ...] = tuple(built)

    def __repr__(self) -> str:
        return f"MarkovProcess(states={list(self.states)}, edges={len(self.edges)})"

    def hamiltonian(self) -> "Hamiltonian":
        return build_hamiltonian(self)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: np.ndarray
    states: FinSet

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def index(self, label: str | int) -> int:
        return label if isinstance(label, (int, np.integer)) else self.states.index(label)


def _matrix(h: Hamiltonian | np.ndarray) -> np.ndarray:
    return h.matrix if isinstance(h, Hamiltonian) else np.asarray(h, dtype=float)


def _index(h: Hamiltonian | np.ndarray, label: str | int) -> int:
    return h.index(label) if isinstance(h, Hamiltonian) else int(label)


def build_hamiltonian(m: MarkovProcess) -> Hamiltonian:
    n = len(m.states)
    h = np.zeros((n, n))
    for e in m.edges:
        if e.source == e.target:
            continue
        s, t = m.states.index(e.source), m.states.index(e.target)
        h[t, s] += e.rate
        h[s, s] -= e.rate
    return Hamiltonian(h, m.states)


def is_infinitesimal_stochastic(h: np.ndarray, tol: float = 1e-12) -> bool:
    h = _matrix(h)
    off = h - np.diag(np.diag(h))
    scale = max(1.0, float(np.abs(h).max(initial=0.0)))
    return bool((off >= 0).all() and np.abs(h.sum(axis=0)).max(initial=0.0) <= tol * scale)


def _rk4(f, p: np.ndarray, h: float) -> np.ndarray:
    k1 = f(p)
    k2 = f(p + 0.5 * h * k1)
    k3 = f(p + 0.5 * h * k2)
    k4 = f(p + h * k3)
    return p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def check_step(h: np.ndarray, dt: float) -> None:
    """Raise if ``dt * max|H_jj|`` is not below 0.5."""
    stiff = float(np.abs(np.diag(h)).max(initial=0.0))
    if dt <= 0:
        raise ValueError("step must be positive")
    if dt * stiff >= 0.5:
        raise UnstableStepError(
            f"dt={dt} too large for max exit rate {stiff}; need dt < {0.5 / stiff:.3g}"
        )


def evolve(h: Hamiltonian | np.ndarray, p0: np.ndarray, t: float, dt: float) -> np.ndarray:
    """Integrate the master equation for time ``t`` with classical RK4.

    The number of steps is ``ceil(t/dt)`` with a uniform step no larger
    than ``dt``.
    """
    hm = _matrix(h)
    check_step(hm, dt)
    p = np.asarray(p0, dtype=float).copy()
    if t <= 0:
        return p
    n = max(1, math.ceil(t / dt - 1e-12))
    step = t / n
    for _ in range(n):
        p = _rk4(lambda x: hm @ x, p, step)
    return p


def flow(h: Hamiltonian | np.ndarray, p: np.ndarray, i: str | int, j: str | int) -> float:
    """Net probability flow from state j to state i."""
    hm = _matrix(h)
    a, b = _index(h, i), _index(h, j)
    return float(hm[a, b] * p[b] - hm[b, a] * p[a])


def affinity(h: Hamiltonian | np.ndarray, p: np.ndarray, i: str | int, j: str | int) -> float:
    hm = _matrix(h)
    a, b = _index(h, i), _index(h, j)
    fwd, bwd = hm[a, b] * p[b], hm[b, a] * p[a]
    if fwd <= 0 or bwd <= 0:
        raise DomainError(
            f"affinity undefined between {i!r} and {j!r}: one-way or unoccupied ({fwd}, {bwd})"
        )
    return math.log(fwd / bwd)


def check_detailed_balance(h: Hamiltonian | np.ndarray, q: np.ndarray, tol: float = 1e-9) -> bool:
    """True when every pairwise flow at ``q`` vanishes (relative to the largest one-way flux)."""
    hm = _matrix(h)
    q = np.asarray(q, dtype=float)
    if (q <= 0).any():
        return False
    flux = hm * q[None, :]
    np.fill_diagonal(flux, 0.0)
    scale = float(np.abs(flux).max(initial=0.0))
    if scale == 0:
        return True
    return bool(np.abs(flux - flux.T).max() <= tol * scale)


def _pair_rates(m: MarkovProcess) -> np.ndarray:
    h = build_hamiltonian(m).matrix.copy()
    np.fill_diagonal(h, 0.0)
    return h


def detailed_balanced_equilibrium(m: MarkovProcess, tol: float = 1e-9) -> np.ndarray | None:
    """Return a detailed-balanced equilibrium if one exists, else ``None``.

    Builds candidate potentials along a BFS spanning forest of the
    undirected support and then checks every pair.  Each connected
    component is normalised to total mass 1/(number of components).
    """
    rates = _pair_rates(m)
    n = len(m.states)
    support = (rates > 0) | (rates.T > 0)
    if (support & ~((rates > 0) & (rates.T > 0))).any():
        return None
    q = np.zeros(n)
    comps = []
    for root in range(n):
        if q[root] > 0:
            continue
        q[root] = 1.0
        comp = [root]
        queue = deque([root])
        while queue:
            j = queue.popleft()
            for k in np.flatnonzero(support[:, j]):
                if q[k] == 0:
                    # H_kj q_j = H_jk q_k along the tree edge
                    q[k] = q[j] * rates[k, j] / rates[j, k]
                    comp.append(int(k))
                    queue.append(int(k))
        comps.append(comp)
    for comp in comps:
        q[comp] /= q[comp].sum() * len(comps)
    if not check_detailed_balance(rates - np.diag(rates.sum(axis=0)), q, tol):
        return None
    return q


def check_kolmogorov(m: MarkovProcess, tol: float = 1e-9) -> bool:
    """Kolmogorov's cycle criterion, via the existence of a balanced potential."""
    return detailed_balanced_equilibrium(m, tol) is not None


def weak_components(m: MarkovProcess) -> list[list[int]]:
    n = len(m.states)
    parent = list(range(n))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for e in m.edges:
        a, b = find(m.states.index(e.source)), find(m.states.index(e.target))
        if a != b:
            parent[max(a, b)] = min(a, b)
    comps: dict[int, list[int]] = {}
    for k in range(n):
        comps.setdefault(find(k), []).append(k)
    return list(comps.values())


class TreeSteadyState(NamedTuple):
    q: np.ndarray
    Z: float


def matrix_tree_steady_state(m: MarkovProcess, normalize: bool = True) -> TreeSteadyState:
    """Steady state from Kirchhoff minors.

    ``q[i]`` is the total weight of spanning trees directed towards ``i``,
    computed as the determinant of ``-H`` with row and column ``i`` removed.
    For a disconnected graph the minors are taken per weakly connected
    component, and normalisation is refused because the result is then
    only one point of a larger steady-state set.
    """
    h = build_hamiltonian(m).matrix
    comps = weak_components(m)
    if normalize and len(comps) > 1:
        raise DomainError(
            f"graph has {len(comps)} components; the steady state is not unique, use normalize=False"
        )
    q = np.zeros(len(m.states))
    for comp in comps:
        lap = -h[np.ix_(comp, comp)]
        if len(comp) == 1:
            q[comp[0]] = 1.0
            continue
        for pos, i in enumerate(comp):
            keep = [k for k in range(len(comp)) if k != pos]
            q[i] = np.linalg.det(lap[np.ix_(keep, keep)])
    q = np.where(np.abs(q) < 1e-300, 0.0, q)
    z = float(q.sum())
    if normalize:
        q = q / z
    return TreeSteadyState(q, z)


def kernel_steady_states(h: Hamiltonian | np.ndarray, tol: float = 1e-10) -> Subspace:
    hm = _matrix(h)
    return Subspace(hm.shape[1], null_space(hm, tol))


def kernel_steady_state(h: Hamiltonian | np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """The unique normalised steady state, when ker H is one-dimensional."""
    ker = kernel_steady_states(h, tol)
    if ker.dim != 1:
        raise DomainError(f"steady state is not unique: ker H has dimension {ker.dim}")
    v = ker.basis[:, 0]
    return v / v.sum()


def entropy_production(h: Hamiltonian | np.ndarray, p: np.ndarray) -> float:
    """Half the sum of flow times affinity over ordered pairs of distinct states."""
    hm = _matrix(h)
    p = np.asarray(p, dtype=float)
    total = 0.0
    n = hm.shape[0]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            fwd, bwd = hm[i, j] * p[j], hm[j, i] * p[i]
            if fwd == bwd:
                continue
            if fwd <= 0 or bwd <= 0:
                raise DomainError(
                    f"entropy production undefined: one-way flow between states {i} and {j}"
                )
            total += 0.5 * (fwd - bwd) * math.log(fwd / bwd)
    return total


def cycle_current(h: Hamiltonian | np.ndarray, p: np.ndarray, cycle: Sequence[str | int]) -> list[float]:
    """Flows along consecutive edges of a cycle (useful to see a NESS current)."""
    return [flow(h, p, cycle[(k + 1) % len(cycle)], cycle[k]) for k in range(len(cycle))]
