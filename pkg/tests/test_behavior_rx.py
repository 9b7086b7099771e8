import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opennets import catalog
from opennets.behavior_markov import blackbox_markov
from opennets.behavior_rx import (
    BehaviorOracle,
    BoundaryTuple,
    SolverSettings,
    check_functoriality_rx,
    gauss_newton,
    linear_behavior_bridge,
)
from opennets.errors import NonlinearFieldError
from opennets.generators import random_open_markov, random_rx_pair
from opennets.linrel import equal_rel
from opennets.open_reaction import OpenReactionNetwork, graybox, tensor_dynam
from opennets.reaction import markov_as_reaction

seeds = st.integers(0, 2**32 - 1)


def tup(*parts):
    return BoundaryTuple(*(np.array(p, dtype=float) for p in parts))


def constraint_residual(f, t: BoundaryTuple) -> float:
    cs = f.cospan
    c = t.witness
    r = f.rhs(c, t.inflow, t.outflow)
    r = np.concatenate([r, c[cs.in_leg.indices] - t.in_conc, c[cs.out_leg.indices] - t.out_conc])
    return float(np.abs(r).max())


def feed_and_dimerise():
    """Input A converts to internal B, which is removed in pairs: c_A = 2 c_B^2 at steady state."""
    return graybox(
        OpenReactionNetwork.build(
            ["A", "B"], [("conv", {"A": 1}, {"B": 1}, 1.0), ("dim", {"B": 2}, {}, 1.0)], {"in": "A"}, {}
        )
    )


def test_binding_membership_by_hand():
    oracle = BehaviorOracle(graybox(catalog.binding(1.0)))
    # c = (1, 2, 3): v = (-2, -2, 4); I1 = 2, I2 + I3 = 2, O4 = 4
    yes = oracle.membership(tup([1, 2, 2], [2, 1.5, 0.5], [3], [4]))
    assert yes.verdict == "yes" and yes.witness.tolist() == [1.0, 2.0, 3.0]
    clash = oracle.membership(tup([1, 2, 2.5], [2, 1, 1], [3], [4]))
    assert clash.verdict == "no" and "'B'" in clash.reason
    wrong_flow = oracle.membership(tup([1, 2, 2], [2, 1, 1], [3], [5]))
    assert wrong_flow.verdict == "no"


def test_internal_species_found_by_search():
    oracle = BehaviorOracle(feed_and_dimerise())
    res = oracle.membership(tup([2.0], [2.0], [], []))
    assert res.verdict == "yes"
    assert abs(res.witness[1]) == pytest.approx(1.0, rel=1e-9)
    assert oracle.membership(tup([2.0], [3.0], [], [])).verdict == "no"


def test_negative_witness_is_flagged():
    oracle = BehaviorOracle(feed_and_dimerise())
    res = oracle.membership(tup([2.0], [2.0], [], []), hints=[np.array([-1.0])])
    assert res.verdict == "yes" and res.witness[1] == pytest.approx(-1.0) and res.unphysical


def test_failed_search_is_unknown_not_no():
    # one Gauss-Newton step from a random start cannot reach the tolerance
    oracle = BehaviorOracle(feed_and_dimerise(), SolverSettings(starts=1, max_iter=1))
    res = oracle.membership(tup([2.0], [2.0], [], []))
    assert res.verdict == "unknown" and res.witness is None


def test_gauss_newton_square_root():
    out = gauss_newton(lambda x: x**2 - 2.0, lambda x: np.diag(2 * x), np.array([1.0]), 1e-14)
    assert out.converged and out.x[0] == pytest.approx(math.sqrt(2.0), rel=1e-14)


@given(seeds)
@settings(max_examples=10)
def test_samples_satisfy_constraints_and_membership(seed):
    r1, _ = random_rx_pair(np.random.default_rng(seed))
    f = graybox(r1)
    oracle = BehaviorOracle(f, seed=seed % 1000)
    samples = oracle.sample(20)
    for t in samples:
        scale = max(1.0, float(np.abs(t.as_vector()).max()))
        assert constraint_residual(f, t) <= 1e-8 * scale
        assert oracle.membership(t, hints=[t.witness]).verdict == "yes"


def test_sampling_is_deterministic():
    f = graybox(catalog.binding(1.0))
    a = BehaviorOracle(f, seed=7).sample(10)
    b = BehaviorOracle(f, seed=7).sample(10)
    assert all(np.array_equal(x.as_vector(), y.as_vector()) for x, y in zip(a, b))
    c = BehaviorOracle(f, seed=8).sample(10)
    assert not all(np.array_equal(x.as_vector(), y.as_vector()) for x, y in zip(a, c))


def test_tensor_accepts_paired_samples():
    f1, f2 = graybox(catalog.binding(1.0)), feed_and_dimerise()
    t = BehaviorOracle(tensor_dynam(f1, f2))
    for s1, s2 in zip(BehaviorOracle(f1).sample(10), BehaviorOracle(f2).sample(10)):
        joined = BoundaryTuple(
            np.concatenate([s1.in_conc, s2.in_conc]),
            np.concatenate([s1.inflow, s2.inflow]),
            np.concatenate([s1.out_conc, s2.out_conc]),
            np.concatenate([s1.outflow, s2.outflow]),
        )
        assert t.membership(joined).verdict == "yes"


@pytest.mark.parametrize("seed", range(20))
def test_functoriality_on_random_pairs(seed):
    r1, r2 = random_rx_pair(np.random.default_rng(1000 + seed))
    report = check_functoriality_rx(graybox(r1), graybox(r2), n=100, seed=seed)
    assert report["failed"] == 0, report["failures"][:3]
    assert report["checked"] == report["forward"]["checked"] + report["backward"]["checked"]


@given(seeds)
@settings(max_examples=20)
def test_linear_bridge_matches_markov_black_box(seed):
    rng = np.random.default_rng(seed)
    m = random_open_markov(rng, int(rng.integers(1, 5)), ["x"], ["y0", "y1"])
    r = OpenReactionNetwork(m.cospan, markov_as_reaction(m.process))
    assert equal_rel(linear_behavior_bridge(graybox(r)), blackbox_markov(m))


def test_bridge_rejects_nonlinear_and_affine_fields():
    with pytest.raises(NonlinearFieldError):
        linear_behavior_bridge(graybox(catalog.binding()))
    source = OpenReactionNetwork.build(["A"], [("make", {}, {"A": 1}, 1.0)], {"x": "A"}, {})
    with pytest.raises(NonlinearFieldError):
        linear_behavior_bridge(graybox(source))


def test_bad_settings_and_shapes():
    with pytest.raises(ValueError):
        SolverSettings(starts=0)
    with pytest.raises(ValueError):
        SolverSettings(box=(1.0, 1.0))
    with pytest.raises(ValueError):
        BehaviorOracle(graybox(catalog.binding())).membership(tup([1, 2], [0, 0], [1], [0]))
