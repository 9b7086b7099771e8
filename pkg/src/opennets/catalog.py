"""Small worked systems used in the docs, the CLI demos and the tests."""
from __future__ import annotations

import numpy as np

from .markov import MarkovProcess
from .open_markov import OpenDetailedBalanced, OpenMarkov
from .open_reaction import OpenReactionNetwork


def membrane(h_in: float = 2.0, h_out: float = 1.0, names=("A", "B", "C")) -> OpenDetailedBalanced:
    """Two outer compartments exchanging with a membrane state in the middle.

    Input is the first outer state, output the second; ``q`` is normalized to
    ``q_outer = 1``.
    """
    a, b, c = names
    edges = [
        (f"{a}{b}", a, b, h_in), (f"{b}{a}", b, a, h_out),
        (f"{c}{b}", c, b, h_in), (f"{b}{c}", b, c, h_out),
    ]
    m = OpenMarkov.build(list(names), edges, {a: a}, {c: c})
    return OpenDetailedBalanced(m.cospan, m.process, np.array([1.0, h_in / h_out, 1.0]))


def membrane_pair(h_in: float = 2.0, h_out: float = 1.0):
    return membrane(h_in, h_out), membrane(h_in, h_out, ("C", "D", "E"))


def three_cycle(alpha: float = 2.0, beta: float = 1.0) -> MarkovProcess:
    """Three states where only C -> A runs at ``beta``; every other ordered pair runs at ``alpha``."""
    return MarkovProcess(
        ["A", "B", "C"],
        [
            ("AB", "A", "B", alpha), ("BA", "B", "A", alpha),
            ("AC", "A", "C", alpha), ("CA", "C", "A", beta),
            ("BC", "B", "C", alpha), ("CB", "C", "B", alpha),
        ],
    )


def leaky_chain(feed: float = 3.0, step: float = 1.0, loss: float = 0.1) -> OpenMarkov:
    """Boundary C feeds A, A feeds B, B leaks to a sink that is never read.

    The sink is modelled as a boundary state ``W`` held at zero.
    """
    return OpenMarkov.build(
        ["A", "B", "C", "W"],
        [("CA", "C", "A", feed), ("AB", "A", "B", step), ("BW", "B", "W", loss)],
        {"C": "C"},
        {"W": "W"},
    )


def unit_chain() -> OpenDetailedBalanced:
    """A <-> B <-> C with unit rates, A and C on the boundary, q uniform."""
    m = OpenMarkov.build(
        ["A", "B", "C"],
        [("AB", "A", "B", 1.0), ("BA", "B", "A", 1.0), ("BC", "B", "C", 1.0), ("CB", "C", "B", 1.0)],
        {"A": "A"},
        {"C": "C"},
    )
    return OpenDetailedBalanced(m.cospan, m.process, np.ones(3))


def two_state(alpha: float = 1.0, beta: float = 2.0) -> OpenMarkov:
    """Closed chain with A -> B at ``alpha`` and B -> A at ``beta``."""
    return OpenMarkov.closed(MarkovProcess(["A", "B"], [("AB", "A", "B", alpha), ("BA", "B", "A", beta)]))


def binding(rate: float = 1.0) -> OpenReactionNetwork:
    """A + B -> 2C with inputs 1 -> A, 2 -> B, 3 -> B and output 4 -> C."""
    return OpenReactionNetwork.build(
        ["A", "B", "C"],
        [("alpha", {"A": 1, "B": 1}, {"C": 2}, rate)],
        {"1": "A", "2": "B", "3": "B"},
        {"4": "C"},
    )


def splitting(rate: float = 1.0) -> OpenReactionNetwork:
    """D -> E + F with input 4 -> D and outputs 5 -> E, 6 -> F."""
    return OpenReactionNetwork.build(
        ["D", "E", "F"],
        [("beta", {"D": 1}, {"E": 1, "F": 1}, rate)],
        {"4": "D"},
        {"5": "E", "6": "F"},
    )


def trimolecular(forward: float = 1.0, backward: float = 1.0) -> OpenReactionNetwork:
    """2A + B <-> 3A with an empty interface."""
    return OpenReactionNetwork.build(
        ["A", "B"],
        [("fwd", {"A": 2, "B": 1}, {"A": 3}, forward), ("bwd", {"A": 3}, {"A": 2, "B": 1}, backward)],
        {},
        {},
    )
