import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opennets import catalog
from opennets.errors import DetailedBalanceError, InterfaceMismatchError, NotSteadyError, UnstableStepError
from opennets.finset import Cospan, FinSet
from opennets.generators import random_db_pair, random_open_db, random_open_markov
from opennets.markov import MarkovProcess, build_hamiltonian, check_detailed_balance, evolve
from opennets.open_markov import (
    OpenDetailedBalanced,
    OpenMarkov,
    boundary_flows,
    compose_open,
    compose_open_db,
    energies_from_q,
    evolve_fixed_boundary,
    open_master_step,
    q_from_energies,
    rates_from_energies,
    solve_open_master_fixed_boundary,
    tensor_open,
)
from opennets.thermo import dissipation_gradient

seeds = st.integers(0, 2**32 - 1)


def glued_hamiltonian(m1, m2):
    """Oracle: push both Hamiltonians forward along the pushout maps, entry by entry."""
    from opennets.finset import glue

    _, po = glue(m1.cospan, m2.cospan)
    n = len(po.apex)
    h = np.zeros((n, n))
    for m, j in ((m1, po.quot_left), (m2, po.quot_right)):
        hm = m.hamiltonian
        idx = j.indices
        for a in range(hm.shape[0]):
            for b in range(hm.shape[1]):
                if a != b and hm[a, b]:
                    h[idx[a], idx[b]] += hm[a, b]
                    h[idx[b], idx[b]] -= hm[a, b]
    return h


def test_membrane_composite_has_five_states():
    m1, m2 = catalog.membrane_pair(2.0, 1.0)
    comp = compose_open_db(m1, m2)
    assert list(comp.states) == ["A", "B", "C", "D", "E"]
    assert comp.q.tolist() == [1.0, 2.0, 1.0, 2.0, 1.0]
    assert check_detailed_balance(comp.hamiltonian, comp.q)
    # C now exchanges with both membranes
    assert comp.hamiltonian[2, 2] == -4.0
    assert len(comp.process.edges) == 8


def test_equilibrium_mismatch_is_reported():
    m1, _ = catalog.membrane_pair(2.0, 1.0)
    m2 = catalog.membrane(2.0, 1.0, ("C", "D", "E"))
    m2 = OpenDetailedBalanced(m2.cospan, m2.process, m2.q * 3.0)
    with pytest.raises(InterfaceMismatchError, match="'C'"):
        compose_open_db(m1, m2)


def test_detailed_balance_is_validated():
    m = OpenMarkov.closed(catalog.three_cycle(2.0, 1.0))
    with pytest.raises(DetailedBalanceError):
        OpenDetailedBalanced(m.cospan, m.process, np.array([8.0, 10.0, 12.0]))
    with pytest.raises(ValueError):
        OpenDetailedBalanced(m.cospan, m.process, np.array([1.0, -1.0, 1.0]))


def test_self_gluing_accumulates_edge_stars():
    # two disjoint edges whose endpoints get identified
    m1 = OpenMarkov.build(["A", "B"], [("ab", "A", "B", 1.0)], {}, {"y1": "B", "y2": "A"})
    m2 = OpenMarkov.build(["C", "D"], [("cd", "C", "D", 2.0)], {"y1": "C", "y2": "D"}, {})
    comp = compose_open(m1, m2)
    assert np.array_equal(comp.hamiltonian, glued_hamiltonian(m1, m2))
    assert len(comp.states) == 2


@given(seeds)
def test_composite_hamiltonian_matches_pushforward(seed):
    rng = np.random.default_rng(seed)
    m1 = random_open_markov(rng, int(rng.integers(1, 5)), ["x"], ["y0", "y1"], "a")
    m2 = random_open_markov(rng, int(rng.integers(1, 5)), ["y0", "y1"], ["z"], "b")
    comp = compose_open(m1, m2)
    # diagonals are sums, so only the order of additions may differ
    assert np.allclose(comp.hamiltonian, glued_hamiltonian(m1, m2), rtol=0, atol=1e-13)


@given(seeds)
def test_composition_associative_up_to_relabeling(seed):
    rng = np.random.default_rng(seed)
    ms = [random_open_markov(rng, int(rng.integers(1, 4)), [f"i{k}"], [f"i{k + 1}"], p) for k, p in enumerate("abc")]
    left = compose_open(compose_open(ms[0], ms[1]), ms[2])
    right = compose_open(ms[0], compose_open(ms[1], ms[2]))
    # same edge multiset once states are named by their apex labels (both use least representatives)
    assert sorted(left.states) == sorted(right.states)
    perm = [list(right.states).index(s) for s in left.states]
    assert np.allclose(left.hamiltonian, right.hamiltonian[np.ix_(perm, perm)])


@given(seeds)
def test_tensor_is_block_diagonal_and_interchanges(seed):
    rng = np.random.default_rng(seed)
    a1 = random_open_markov(rng, 2, ["x"], ["y"], "a")
    a2 = random_open_markov(rng, 3, ["y"], ["z"], "b")
    b1 = random_open_markov(rng, 2, ["u"], ["v"], "c")
    b2 = random_open_markov(rng, 2, ["v"], ["w"], "d")
    t = tensor_open(a1, b1)
    assert len(t.states) == 4
    h = t.hamiltonian
    assert np.array_equal(h[:2, :2], a1.hamiltonian) and not h[:2, 2:].any() and not h[2:, :2].any()
    lhs = tensor_open(compose_open(a1, a2), compose_open(b1, b2))
    rhs = compose_open(tensor_open(a1, b1), tensor_open(a2, b2))
    assert sorted(lhs.states) == sorted(rhs.states)
    perm = [list(rhs.states).index(s) for s in lhs.states]
    assert np.allclose(lhs.hamiltonian, rhs.hamiltonian[np.ix_(perm, perm)])


def test_identity_cospan_composition():
    m = catalog.membrane()
    ident = OpenMarkov(Cospan.identity(FinSet(["C"])), MarkovProcess(["C"], []))
    comp = compose_open(m, ident)
    assert np.array_equal(comp.hamiltonian, m.hamiltonian)


def test_unit_chain_boundary_flows():
    m = catalog.unit_chain()
    p = solve_open_master_fixed_boundary(m, {"A": 2.0, "C": 0.0}).p
    assert p.tolist() == [2.0, 1.0, 0.0]
    assert boundary_flows(m, p).tolist() == [1.0, -1.0]


def test_fixed_boundary_at_equilibrium_returns_q():
    m = catalog.membrane(3.0, 0.5)
    p = solve_open_master_fixed_boundary(m, m.q[[0, 2]]).p
    assert np.allclose(p, m.q)
    assert np.allclose(boundary_flows(m, p), 0.0)


def test_degenerate_internal_block_reports_kernel():
    m = OpenMarkov.build(
        ["A", "B", "C", "D"],
        [("ab", "A", "B", 1.0), ("ba", "B", "A", 1.0), ("cd", "C", "D", 1.0), ("dc", "D", "C", 1.0)],
        {"a": "A"},
        {},
    )
    sol = solve_open_master_fixed_boundary(m, [1.0])
    assert sol.degenerate and sol.kernel.shape == (4, 1)
    assert sol.p[1] == pytest.approx(1.0)
    assert np.allclose(m.hamiltonian @ sol.kernel, 0.0)


def test_non_steady_boundary_flows_raise():
    m = catalog.membrane()
    with pytest.raises(NotSteadyError):
        boundary_flows(m, np.array([1.0, 0.0, 1.0]))


@given(seeds)
def test_steady_state_is_dissipation_stationary(seed):
    rng = np.random.default_rng(seed)
    m = random_open_db(rng, int(rng.integers(2, 6)), ["x0", "x1"], ["y0"])
    p = solve_open_master_fixed_boundary(m, rng.uniform(0, 2, len(m.cospan.boundary()))).p
    grad = dissipation_gradient(m, p)
    assert np.abs(grad[m.internal_indices()]).max(initial=0.0) <= 1e-9 * max(1.0, np.abs(grad).max())


def test_compensating_flows_hold_steady_state():
    m = catalog.membrane(2.0, 1.0)
    p = solve_open_master_fixed_boundary(m, {"A": 1.5, "C": 0.25}).p
    inflow = boundary_flows(m, p)
    x = p.copy()
    for _ in range(1000):
        x = open_master_step(m, x, [inflow[0]], [-inflow[1]], 0.05)
    assert np.abs(x - p).max() <= 1e-9


def test_zero_flows_match_closed_evolution():
    m = catalog.membrane(2.0, 1.0)
    p0 = np.array([1.0, 0.0, 0.5])
    x = p0.copy()
    for _ in range(20):
        x = open_master_step(m, x, [0.0], [0.0], 0.05)
    assert np.allclose(x, evolve(m.hamiltonian, p0, 1.0, 0.05), atol=1e-14)
    with pytest.raises(UnstableStepError):
        open_master_step(m, x, [0.0], [0.0], 1.0)


def test_fixed_boundary_evolution_relaxes_to_steady_state():
    m = catalog.membrane(2.0, 1.0)
    p = evolve_fixed_boundary(m, np.array([1.0, 0.0, 0.2]), 20.0, 0.05)
    assert p[0] == 1.0 and p[2] == 0.2
    assert p[1] == pytest.approx(2.0 * 1.2 / 2, rel=1e-9)


def test_energy_conversions():
    assert q_from_energies([0.0, 0.0]).tolist() == [1.0, 1.0]
    assert np.allclose(q_from_energies([np.log(1.0), np.log(2.0)]), [1.0, 0.5])
    with pytest.raises(ValueError):
        energies_from_q([1.0, 0.0])


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6))
def test_energy_round_trip(q):
    q = np.array(q)
    assert np.abs(q_from_energies(energies_from_q(q)) - q).max() <= 1e-12 * max(1.0, q.max())


@given(seeds, st.integers(2, 5))
def test_energy_rates_are_detailed_balanced(seed, n):
    rng = np.random.default_rng(seed)
    states = [f"s{k}" for k in range(n)]
    energies = rng.uniform(-2, 2, n)
    pairs = [(states[k], states[k + 1]) for k in range(n - 1)] + [(states[0], states[-1])] * (n > 2)
    m = MarkovProcess(states, rates_from_energies(states, pairs, energies))
    assert check_detailed_balance(build_hamiltonian(m), q_from_energies(energies))


@given(seeds)
def test_random_db_pairs_compose(seed):
    m1, m2 = random_db_pair(np.random.default_rng(seed))
    comp = compose_open_db(m1, m2)
    assert check_detailed_balance(comp.hamiltonian, comp.q)
