"""Open reaction networks and open dynamical systems.

Gray-boxing sends an open reaction network to its mass-action field with
the same boundary legs.  Open dynamical systems compose by pushing both
fields forward along the pushout maps and adding them, and they evolve by
the open rate equation

    dc/dt = v(c) + i_* I - o_* O.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .finset import Cospan, FinSet, disjoint_union, glue, pushforward, tensor_cospans
from .reaction import (
    PolyVectorField,
    ReactionNetwork,
    Transition,
    map_network,
    mass_action_field,
    push_pull_field,
    rk4_guarded,
)


@dataclass(frozen=True, eq=False)
class OpenReactionNetwork:
    cospan: Cospan
    network: ReactionNetwork

    def __post_init__(self):
        if self.cospan.apex != self.network.species:
            raise ValueError("cospan apex must equal the species set, in the same order")

    @classmethod
    def build(cls, species, transitions, inputs: Mapping[str, str], outputs: Mapping[str, str]) -> "OpenReactionNetwork":
        net = ReactionNetwork(species, transitions)
        return cls(Cospan.from_legs(net.species, inputs, outputs), net)

    @property
    def species(self) -> FinSet:
        return self.network.species


@dataclass(frozen=True, eq=False)
class OpenDynam:
    cospan: Cospan
    field: PolyVectorField

    def __post_init__(self):
        if self.cospan.apex != self.field.species:
            raise ValueError("cospan apex must equal the species set of the field")

    @property
    def species(self) -> FinSet:
        return self.field.species

    def __eq__(self, other: object) -> bool:
        return isinstance(other, OpenDynam) and self.cospan == other.cospan and self.field == other.field

    __hash__ = None

    def rhs(self, c: np.ndarray, inflow, outflow) -> np.ndarray:
        return (
            self.field(c)
            + pushforward(self.cospan.in_leg, np.asarray(inflow, dtype=float))
            - pushforward(self.cospan.out_leg, np.asarray(outflow, dtype=float))
        )


def _merge_transitions(r1: ReactionNetwork, r2: ReactionNetwork, apex: FinSet, j1, j2) -> ReactionNetwork:
    names, l1, l2 = disjoint_union(
        FinSet(t.name for t in r1.transitions), FinSet(t.name for t in r2.transitions)
    )
    pushed1 = map_network(j1, r1)
    pushed2 = map_network(j2, r2)
    trs = [Transition(l1(t.name), t.source, t.target, t.rate) for t in pushed1.transitions]
    trs += [Transition(l2(t.name), t.source, t.target, t.rate) for t in pushed2.transitions]
    return ReactionNetwork(apex, trs)


def compose_open_rx(r1: OpenReactionNetwork, r2: OpenReactionNetwork) -> OpenReactionNetwork:
    cospan, po = glue(r1.cospan, r2.cospan)
    net = _merge_transitions(r1.network, r2.network, po.apex, po.quot_left, po.quot_right)
    return OpenReactionNetwork(cospan, net)


def tensor_open_rx(r1: OpenReactionNetwork, r2: OpenReactionNetwork) -> OpenReactionNetwork:
    cospan, a1, a2 = tensor_cospans(r1.cospan, r2.cospan)
    return OpenReactionNetwork(cospan, _merge_transitions(r1.network, r2.network, cospan.apex, a1, a2))


def graybox(r: OpenReactionNetwork) -> OpenDynam:
    return OpenDynam(r.cospan, mass_action_field(r.network))


def compose_dynam(f1: OpenDynam, f2: OpenDynam) -> OpenDynam:
    """Glue two open dynamical systems: ``j_* v j^* + j'_* v' j'^*`` on the pushout."""
    cospan, po = glue(f1.cospan, f2.cospan)
    field = push_pull_field(po.quot_left, f1.field) + push_pull_field(po.quot_right, f2.field)
    return OpenDynam(cospan, field)


def tensor_dynam(f1: OpenDynam, f2: OpenDynam) -> OpenDynam:
    cospan, a1, a2 = tensor_cospans(f1.cospan, f2.cospan)
    return OpenDynam(cospan, push_pull_field(a1, f1.field) + push_pull_field(a2, f2.field))


def open_rate_step(f: OpenDynam, c: np.ndarray, inflow, outflow, dt: float) -> np.ndarray:
    """One guarded RK4 step with the boundary flows held constant."""
    drive = pushforward(f.cospan.in_leg, np.asarray(inflow, dtype=float)) - pushforward(
        f.cospan.out_leg, np.asarray(outflow, dtype=float)
    )
    c = np.asarray(c, dtype=float)
    return rk4_guarded(lambda x: f.field(x) + drive, c, dt, bool((c >= 0).all()))
