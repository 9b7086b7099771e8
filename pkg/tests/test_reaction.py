import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opennets import catalog
from opennets.errors import NumericalError
from opennets.finset import FinMap, FinSet
from opennets.generators import random_connected_process, random_reaction_network
from opennets.markov import build_hamiltonian
from opennets.reaction import (
    PolyVectorField,
    ReactionNetwork,
    conservation_laws,
    integrate_rate_equation,
    map_network,
    markov_as_reaction,
    mass_action_field,
    push_pull_field,
    rk4_guarded,
)

seeds = st.integers(0, 2**32 - 1)


def direct_rate(r: ReactionNetwork, c: np.ndarray) -> np.ndarray:
    """Float oracle: sum over transitions of rate * (target - source) * prod c^source."""
    out = np.zeros(len(r.species))
    for t in r.transitions:
        mono = math.prod(float(x) ** k for x, k in zip(c, t.source))
        out += float(t.rate) * (np.array(t.target) - np.array(t.source)) * mono
    return out


def test_binding_field_by_hand():
    v = mass_action_field(catalog.binding(3.0).network)
    assert v.components == ({(1, 1, 0): Fraction(-3)}, {(1, 1, 0): Fraction(-3)}, {(1, 1, 0): Fraction(6)})
    assert v(np.array([2.0, 0.5, 7.0])).tolist() == [-3.0, -3.0, 6.0]
    assert v.format().splitlines()[2] == "dC/dt = (6)*A*B"


def test_trimolecular_field_and_degree():
    v = mass_action_field(catalog.trimolecular(1.0, 1.0).network)
    # 2A+B -> 3A gains one A and loses one B; the reverse undoes it
    assert v.components[0] == {(2, 1): Fraction(1), (3, 0): Fraction(-1)}
    assert v.components[1] == {(2, 1): Fraction(-1), (3, 0): Fraction(1)}
    assert v.degree() == 3 and v.degree_in([1]) == 1
    assert [e for e, _ in v.terms(0)] == [(3, 0), (2, 1)]


@pytest.mark.parametrize(
    "transition",
    [
        ("t", {"A": 1}, {}, 0.0),
        ("t", {"A": 1}, {}, -1.0),
        ("t", {"A": 1}, {}, float("inf")),
        ("t", {"A": 1.5}, {}, 1.0),
        ("t", {"A": -1}, {}, 1.0),
        ("t", {"Z": 1}, {}, 1.0),
    ],
)
def test_invalid_transitions_rejected(transition):
    with pytest.raises(ValueError):
        ReactionNetwork(["A"], [transition])


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        ReactionNetwork(["A"], [("t", {"A": 1}, {}, 1.0), ("t", {}, {"A": 1}, 1.0)])


def test_identity_transition_contributes_nothing():
    v = mass_action_field(ReactionNetwork(["A"], [("t", {"A": 1}, {"A": 1}, 2.0)]))
    assert v == PolyVectorField.zero(FinSet(["A"]))


@given(seeds, st.integers(1, 4), st.integers(0, 5))
def test_field_matches_direct_sum(seed, n, k):
    rng = np.random.default_rng(seed)
    r = random_reaction_network(rng, n, k, max_degree=3)
    c = rng.uniform(0, 2, n)
    v = mass_action_field(r)
    assert np.allclose(v(c), direct_rate(r, c), rtol=1e-12, atol=1e-12)


@given(seeds, st.integers(1, 4))
def test_jacobian_matches_finite_difference(seed, n):
    rng = np.random.default_rng(seed)
    v = mass_action_field(random_reaction_network(rng, n, 4, max_degree=3))
    c = rng.uniform(0.2, 2, n)
    h = 1e-6
    fd = np.column_stack([(v(c + h * e) - v(c - h * e)) / (2 * h) for e in np.eye(n)])
    assert np.allclose(v.jacobian(c), fd, rtol=1e-6, atol=1e-7)


@given(seeds, st.integers(1, 4), st.integers(1, 3))
def test_field_is_natural_under_relabeling(seed, n, m):
    rng = np.random.default_rng(seed)
    r = random_reaction_network(rng, n, 3, rational=True)
    f = FinMap.from_indices(r.species, FinSet(f"T{k}" for k in range(m)), rng.integers(m, size=n).tolist())
    assert push_pull_field(f, mass_action_field(r)) == mass_action_field(map_network(f, r))


@given(seeds, st.integers(1, 4))
def test_conservation_laws_annihilate_the_field(seed, n):
    rng = np.random.default_rng(seed)
    r = random_reaction_network(rng, n, int(rng.integers(0, 4)))
    w = conservation_laws(r)
    c = rng.uniform(0, 2, n)
    if w.size:
        assert np.abs(w @ mass_action_field(r)(c)).max() < 1e-10


def test_decay_matches_exponential():
    r = ReactionNetwork(["A", "B"], [("t", {"A": 1}, {"B": 1}, 0.7)])
    times, traj = integrate_rate_equation(mass_action_field(r), np.array([1.0, 0.0]), 2.0, 0.01)
    assert times[-1] == 2.0 and len(times) == 201
    assert traj[-1, 0] == pytest.approx(math.exp(-1.4), rel=1e-9)
    assert traj[-1].sum() == pytest.approx(1.0, rel=1e-13)


def test_zero_time_integration():
    times, traj = integrate_rate_equation(mass_action_field(catalog.binding().network), np.ones(3), 0.0, 0.1)
    assert times.tolist() == [0.0] and traj.shape == (1, 3)


def test_binding_conserves_total_and_stays_nonnegative():
    v = mass_action_field(catalog.binding(5.0).network)
    _, traj = integrate_rate_equation(v, np.array([1.0, 2.0, 0.0]), 3.0, 0.05)
    assert (traj >= -1e-9).all()
    assert np.allclose(traj.sum(axis=1), 3.0)
    assert traj[-1, 0] < 1e-3


def test_guarded_step_gives_up_on_blowup():
    with pytest.raises(NumericalError):
        rk4_guarded(lambda c: c**2, np.array([1e200]), 1.0, True, max_halvings=2)


@given(seeds, st.integers(1, 5))
def test_markov_reaction_field_is_the_hamiltonian(seed, n):
    m = random_connected_process(np.random.default_rng(seed), n)
    a = mass_action_field(markov_as_reaction(m)).linear_matrix()
    assert np.allclose(a, build_hamiltonian(m).matrix, rtol=1e-15, atol=0)


def test_nonlinear_field_has_no_matrix():
    with pytest.raises(ValueError):
        mass_action_field(catalog.binding().network).linear_matrix()
