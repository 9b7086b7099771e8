import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from opennets.errors import InterfaceMismatchError
from opennets.finset import (
    Cospan,
    FinMap,
    FinSet,
    compose_cospans,
    disjoint_union,
    glue,
    pullback,
    pushforward,
    pushout,
    tensor_cospans,
)


def finset(prefix, n):
    return FinSet(f"{prefix}{k}" for k in range(n))


@st.composite
def maps(draw, dom, cod):
    idx = draw(st.lists(st.integers(0, len(cod) - 1), min_size=len(dom), max_size=len(dom))) if len(cod) else []
    return FinMap.from_indices(dom, cod, idx)


@st.composite
def cospans(draw, left, right, prefix):
    apex = finset(prefix, draw(st.integers(1, 5)))
    return Cospan(left, apex, right, draw(maps(left, apex)), draw(maps(right, apex)))


@st.composite
def composable_triples(draw):
    x, y, z, w = (finset(p, draw(st.integers(0, 3))) for p in "xyzw")
    return draw(cospans(x, y, "a")), draw(cospans(y, z, "b")), draw(cospans(z, w, "c"))


def boundary_partition(c: Cospan):
    """Which interface points share an apex point, as a set of frozensets."""
    groups = {}
    for side, leg in (("L", c.in_leg), ("R", c.out_leg)):
        for x in leg.domain:
            groups.setdefault(leg(x), set()).add((side, x))
    return {frozenset(g) for g in groups.values()}


def test_membrane_pushout_labels():
    c1 = Cospan.from_legs("ABC", {"A": "A"}, {"C": "C"})
    c2 = Cospan.from_legs("CDE", {"C": "C"}, {"E": "E"})
    comp, po = glue(c1, c2)
    assert list(comp.apex) == ["A", "B", "C", "D", "E"]
    assert po.quot_right.as_dict() == {"C": "C", "D": "D", "E": "E"}
    assert comp.in_leg.as_dict() == {"A": "A"} and comp.out_leg.as_dict() == {"E": "E"}


def test_reaction_pair_merges_c_and_d():
    c1 = Cospan.from_legs("ABC", {"1": "A", "2": "B", "3": "B"}, {"4": "C"})
    c2 = Cospan.from_legs("DEF", {"4": "D"}, {"5": "E", "6": "F"})
    comp = compose_cospans(c1, c2)
    assert list(comp.apex) == ["A", "B", "C", "E", "F"]
    assert comp.in_leg.as_dict() == {"1": "A", "2": "B", "3": "B"}


def test_interface_mismatch():
    c1 = Cospan.from_legs("AB", {}, {"y": "A"})
    c2 = Cospan.from_legs("CD", {"z": "C"}, {})
    with pytest.raises(InterfaceMismatchError):
        glue(c1, c2)


def test_disjoint_union_primes_clashes():
    u, inl, inr = disjoint_union(FinSet(["a", "b"]), FinSet(["b", "c", "b'"]))
    assert list(u) == ["a", "b", "b''", "c", "b'"]
    assert inr.as_dict() == {"b": "b''", "c": "c", "b'": "b'"}
    assert inl.is_injective() and inr.is_injective()


def test_empty_interface_pushout_is_disjoint_union():
    c1 = Cospan.from_legs("AB", {}, {})
    c2 = Cospan.from_legs("AC", {}, {})
    assert list(compose_cospans(c1, c2).apex) == ["A", "B", "A'", "C"]


def test_finmap_rejects_bad_assignment():
    with pytest.raises(ValueError):
        FinMap(FinSet("ab"), FinSet("x"), {"a": "x"})
    with pytest.raises(ValueError):
        FinMap(FinSet("a"), FinSet("x"), {"a": "y"})


@given(st.data())
def test_pushout_square_commutes_and_is_minimal(data):
    y = finset("y", data.draw(st.integers(0, 4)))
    s1 = finset("s", data.draw(st.integers(1, 5)))
    s2 = finset("t", data.draw(st.integers(1, 5)))
    o = data.draw(maps(y, s1))
    i2 = data.draw(maps(y, s2))
    po = pushout(o, i2)
    for lab in y:
        assert po.quot_left(o(lab)) == po.quot_right(i2(lab))
    # every apex point comes from somewhere
    assert set(po.quot_left.image()) | set(po.quot_right.image()) == set(po.apex)
    # number of classes equals the connected components of the gluing graph
    n1 = len(s1)
    rows = [int(k) for k in o.indices]
    cols = [n1 + int(k) for k in i2.indices]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n1 + len(s2),) * 2)
    assert len(po.apex) == connected_components(graph, directed=False)[0]


@given(composable_triples())
def test_composition_associative_up_to_relabeling(triple):
    a, b, c = triple
    left = compose_cospans(compose_cospans(a, b), c)
    right = compose_cospans(a, compose_cospans(b, c))
    assert len(left.apex) == len(right.apex)
    assert boundary_partition(left) == boundary_partition(right)


@given(st.data())
def test_identity_cospan_is_neutral(data):
    x = finset("x", data.draw(st.integers(0, 3)))
    y = finset("y", data.draw(st.integers(0, 3)))
    c = data.draw(cospans(x, y, "a"))
    for comp in (compose_cospans(Cospan.identity(x), c), compose_cospans(c, Cospan.identity(y))):
        assert len(comp.apex) == len(c.apex)
        assert boundary_partition(comp) == boundary_partition(c)


@given(st.data())
def test_pushforward_pullback_adjoint_and_functorial(data):
    a, b, c = (finset(p, data.draw(st.integers(1, 5))) for p in "abc")
    f = data.draw(maps(a, b))
    g = data.draw(maps(b, c))
    v = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=len(a), max_size=len(a))))
    w = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=len(b), max_size=len(b))))
    assert np.isclose(pushforward(f, v) @ w, v @ pullback(f, w))
    assert np.allclose(pushforward(f.then(g), v), pushforward(g, pushforward(f, v)))
    assert np.allclose(f.matrix() @ v, pushforward(f, v))
    # pushforward preserves totals
    assert np.isclose(pushforward(f, v).sum(), v.sum())


@given(st.data())
def test_tensor_keeps_both_sides(data):
    x1, y1, x2, y2 = (finset(p, data.draw(st.integers(0, 2))) for p in ("x", "y", "x", "y"))
    c1 = data.draw(cospans(x1, y1, "a"))
    c2 = data.draw(cospans(x2, y2, "a"))
    t, a1, a2 = tensor_cospans(c1, c2)
    assert len(t.apex) == len(c1.apex) + len(c2.apex)
    assert len(t.left) == len(x1) + len(x2)
    assert set(a1.image()).isdisjoint(a2.image())
    assert len(t.boundary()) == len(c1.boundary()) + len(c2.boundary())
