"""Seeded random instances for property checks and sweeps."""
from __future__ import annotations

import numpy as np

from .finset import Cospan, FinMap, FinSet
from .markov import Edge, MarkovProcess
from .open_markov import OpenDetailedBalanced, OpenMarkov
from .open_reaction import OpenReactionNetwork
from .reaction import ReactionNetwork, Transition


def _labels(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{k}" for k in range(n)]


def random_connected_process(
    rng: np.random.Generator, n: int, extra_edges: int = 3, rate_range=(0.2, 3.0), prefix: str = "s", unit: bool = False
) -> MarkovProcess:
    """A strongly connected process: a random directed cycle plus extra random edges."""
    states = _labels(prefix, n)
    order = rng.permutation(n)
    edges = []
    draw = (lambda: 1.0) if unit else (lambda: float(rng.uniform(*rate_range)))
    if n > 1:
        for k in range(n):
            edges.append((states[order[k]], states[order[(k + 1) % n]], draw()))
    for _ in range(extra_edges if n > 1 else 0):
        a, b = rng.choice(n, size=2, replace=False)
        edges.append((states[a], states[b], draw()))
    return MarkovProcess(states, [Edge(f"e{k}", s, t, r) for k, (s, t, r) in enumerate(edges)])


def random_db_process(
    rng: np.random.Generator, n: int, q: np.ndarray | None = None, density: float = 0.6, prefix: str = "s"
) -> tuple[MarkovProcess, np.ndarray]:
    """A connected detailed-balanced process and its equilibrium ``q``.

    Symmetric conductances ``c`` on a random spanning tree plus random extra
    pairs give rates ``c / q_source`` in both directions.
    """
    states = _labels(prefix, n)
    q = rng.uniform(0.5, 2.0, n) if q is None else np.asarray(q, dtype=float)
    pairs = set()
    order = rng.permutation(n)
    for k in range(1, n):
        pairs.add(tuple(sorted((int(order[k]), int(order[rng.integers(k)])))))
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density:
                pairs.add((a, b))
    edges = []
    for a, b in sorted(pairs):
        c = float(rng.uniform(0.5, 3.0))
        edges.append(Edge(f"{states[a]}>{states[b]}", states[a], states[b], c / q[a]))
        edges.append(Edge(f"{states[b]}>{states[a]}", states[b], states[a], c / q[b]))
    return MarkovProcess(states, edges), q


def _random_leg(rng: np.random.Generator, iface: list[str], apex: FinSet, injective: bool) -> FinMap:
    k = len(iface)
    if injective:
        idx = rng.choice(len(apex), size=k, replace=False)
    else:
        idx = rng.integers(len(apex), size=k)
    return FinMap(FinSet(iface), apex, {x: apex[int(i)] for x, i in zip(iface, idx)})


def random_open_db(
    rng: np.random.Generator,
    n: int,
    inputs: list[str],
    outputs: list[str],
    prefix: str = "s",
    fixed_q: dict[str, float] | None = None,
    injective_inputs: bool = False,
) -> OpenDetailedBalanced:
    """Random open detailed-balanced process with the given interface labels.

    ``fixed_q`` pins q on the images of named input labels, which keeps q
    consistent across a gluing.
    """
    apex = FinSet(_labels(prefix, n))
    in_leg = _random_leg(rng, inputs, apex, injective_inputs or fixed_q is not None)
    out_leg = _random_leg(rng, outputs, apex, False)
    q = rng.uniform(0.5, 2.0, n)
    if fixed_q:
        for x, val in fixed_q.items():
            q[apex.index(in_leg(x))] = val
    proc, q = random_db_process(rng, n, q, prefix=prefix)
    return OpenDetailedBalanced(Cospan(FinSet(inputs), apex, FinSet(outputs), in_leg, out_leg), proc, q)


def random_db_pair(rng: np.random.Generator, max_states: int = 5) -> tuple[OpenDetailedBalanced, OpenDetailedBalanced]:
    """Composable pair M: X -> Y, M': Y -> Z whose equilibria agree on glued states."""
    nx, ny, nz = (int(k) for k in rng.integers(0, 3, size=3))
    ny = max(ny, 1)
    n1 = int(rng.integers(max(1, ny), max_states + 1))
    n2 = int(rng.integers(max(1, ny), max_states + 1))
    xs, ys, zs = _labels("x", nx), _labels("y", ny), _labels("z", nz)
    m1 = random_open_db(rng, n1, xs, ys, prefix="a")
    q_at_y = {y: float(m1.q[m1.states.index(m1.cospan.out_leg(y))]) for y in ys}
    m2 = random_open_db(rng, n2, ys, zs, prefix="b", fixed_q=q_at_y)
    return m1, m2


def random_open_markov(rng: np.random.Generator, n: int, inputs: list[str], outputs: list[str], prefix: str = "s") -> OpenMarkov:
    proc = random_connected_process(rng, n, extra_edges=int(rng.integers(0, 4)), prefix=prefix)
    apex = proc.states
    return OpenMarkov(
        Cospan(
            FinSet(inputs), apex, FinSet(outputs),
            _random_leg(rng, inputs, apex, False), _random_leg(rng, outputs, apex, False),
        ),
        proc,
    )


def _random_complex(rng: np.random.Generator, n: int, max_degree: int) -> tuple[int, ...]:
    c = np.zeros(n, dtype=int)
    for _ in range(int(rng.integers(0, max_degree + 1))):
        c[rng.integers(n)] += 1
    return tuple(int(k) for k in c)


def random_reaction_network(
    rng: np.random.Generator, n: int, n_transitions: int, max_degree: int = 2, prefix: str = "S", rational: bool = False
) -> ReactionNetwork:
    species = _labels(prefix, n)
    trs = []
    for k in range(n_transitions):
        src = _random_complex(rng, n, max_degree)
        tgt = _random_complex(rng, n, max_degree)
        rate = float(rng.integers(1, 5)) / float(rng.integers(1, 4)) if rational else float(rng.uniform(0.5, 2.0))
        trs.append(Transition(f"t{k}", src, tgt, rate))
    return ReactionNetwork(species, trs)


def random_open_rx(
    rng: np.random.Generator, n: int, inputs: list[str], outputs: list[str], prefix: str = "S", max_degree: int = 2
) -> OpenReactionNetwork:
    """Random open network; every species also decays, so steady states exist more often."""
    net = random_reaction_network(rng, n, int(rng.integers(1, 4)), max_degree, prefix)
    trs = list(net.transitions)
    for k, s in enumerate(net.species):
        src = [0] * n
        src[k] = 1
        trs.append(Transition(f"d{k}", tuple(src), (0,) * n, float(rng.uniform(0.5, 2.0))))
    net = ReactionNetwork(net.species, trs)
    apex = net.species
    cospan = Cospan(
        FinSet(inputs), apex, FinSet(outputs),
        _random_leg(rng, inputs, apex, False), _random_leg(rng, outputs, apex, False),
    )
    return OpenReactionNetwork(cospan, net)


def random_rx_pair(rng: np.random.Generator, max_species: int = 4, max_degree: int = 2):
    nx, ny, nz = (int(k) for k in rng.integers(1, 3, size=3))
    xs, ys, zs = _labels("x", nx), _labels("y", ny), _labels("z", nz)
    r1 = random_open_rx(rng, int(rng.integers(1, max_species + 1)), xs, ys, "P", max_degree)
    r2 = random_open_rx(rng, int(rng.integers(1, max_species + 1)), ys, zs, "Q", max_degree)
    return r1, r2
