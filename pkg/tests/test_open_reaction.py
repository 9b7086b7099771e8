from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opennets import catalog
from opennets.finset import Cospan, FinSet, glue
from opennets.generators import random_open_rx, random_rx_pair
from opennets.open_reaction import (
    OpenDynam,
    OpenReactionNetwork,
    compose_dynam,
    compose_open_rx,
    graybox,
    open_rate_step,
    tensor_dynam,
    tensor_open_rx,
)
from opennets.reaction import ReactionNetwork, integrate_rate_equation, mass_action_field

seeds = st.integers(0, 2**32 - 1)


def test_binding_then_splitting():
    comp = compose_open_rx(catalog.binding(1.5), catalog.splitting(0.7))
    assert list(comp.species) == ["A", "B", "C", "E", "F"]
    names = [t.name for t in comp.network.transitions]
    assert len(names) == 2
    split = comp.network.transitions[1]
    assert split.source == (0, 0, 1, 0, 0) and split.target == (0, 0, 0, 1, 1)
    v = graybox(comp).field
    assert v.components[2] == {(1, 1, 0, 0, 0): Fraction(3), (0, 0, 1, 0, 0): -Fraction(0.7)}
    assert graybox(comp) == compose_dynam(graybox(catalog.binding(1.5)), graybox(catalog.splitting(0.7)))


def test_repeated_input_legs_add_their_flows():
    f = graybox(catalog.binding(1.0))
    c = np.array([1.0, 2.0, 0.0])
    rhs = f.rhs(c, [0.1, 0.2, 0.3], [0.5])
    # B receives I2 + I3, C loses O4
    assert np.allclose(rhs, [-2.0 + 0.1, -2.0 + 0.5, 4.0 - 0.5])


@given(seeds)
def test_graybox_is_functorial(seed):
    r1, r2 = random_rx_pair(np.random.default_rng(seed))
    assert graybox(compose_open_rx(r1, r2)) == compose_dynam(graybox(r1), graybox(r2))


@given(seeds)
def test_graybox_is_monoidal(seed):
    rng = np.random.default_rng(seed)
    r1 = random_open_rx(rng, int(rng.integers(1, 4)), ["x"], ["y"], "P")
    r2 = random_open_rx(rng, int(rng.integers(1, 4)), ["u", "v"], [], "Q")
    t = tensor_open_rx(r1, r2)
    assert len(t.species) == len(r1.species) + len(r2.species)
    assert graybox(t) == tensor_dynam(graybox(r1), graybox(r2))


@given(seeds)
def test_composed_field_splits_into_pushed_parts(seed):
    """Numerical oracle: evaluate the glued field by pulling a state back to each part."""
    rng = np.random.default_rng(seed)
    r1, r2 = random_rx_pair(rng)
    f = compose_dynam(graybox(r1), graybox(r2))
    _, po = glue(r1.cospan, r2.cospan)
    c = rng.uniform(0, 2, len(f.species))
    expected = np.zeros(len(f.species))
    for g, j in ((graybox(r1), po.quot_left), (graybox(r2), po.quot_right)):
        np.add.at(expected, j.indices, g.field(c[j.indices]))
    assert np.allclose(f.field(c), expected, rtol=1e-12, atol=1e-12)


def test_zero_flow_step_matches_closed_integration():
    f = graybox(catalog.binding(2.0))
    c0 = np.array([1.0, 0.5, 0.0])
    c = c0
    for _ in range(10):
        c = open_rate_step(f, c, [0.0, 0.0, 0.0], [0.0], 0.05)
    _, traj = integrate_rate_equation(f.field, c0, 0.5, 0.05)
    assert np.allclose(c, traj[-1], rtol=1e-13)


def test_constant_inflow_balances_decay():
    r = OpenReactionNetwork.build(["A"], [("decay", {"A": 1}, {}, 2.0)], {"in": "A"}, {})
    f = graybox(r)
    c = np.array([0.0])
    for _ in range(400):
        c = open_rate_step(f, c, [1.0], [], 0.05)
    assert c[0] == pytest.approx(0.5, rel=1e-9)


def test_apex_must_match_species():
    net = ReactionNetwork(["A", "B"], [])
    with pytest.raises(ValueError):
        OpenReactionNetwork(Cospan.from_legs(["B", "A"], {}, {}), net)
    with pytest.raises(ValueError):
        OpenDynam(Cospan.from_legs(["A"], {}, {}), mass_action_field(net))


def test_empty_interface_composition_is_disjoint():
    a = catalog.trimolecular()
    comp = compose_open_rx(a, a)
    assert list(comp.species) == ["A", "B", "A'", "B'"]
    assert comp.cospan.left == FinSet([]) and len(comp.network.transitions) == 4
