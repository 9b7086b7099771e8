"""Finite sets, functions, cospans and pushouts.

Everything here is label based: a :class:`FinSet` is an ordered tuple of
distinct strings and vectors indexed by it are dense numpy arrays in that
order.  Pushouts glue two sets along a shared interface and are the only
composition mechanism the rest of the package uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import InterfaceMismatchError


class FinSet:
    """Ordered set of distinct string labels."""

    __slots__ = ("elements", "_pos")

    def __init__(self, elements: Iterable[str] = ()):
        elems = tuple(str(e) for e in elements)
        if len(set(elems)) != len(elems):
            dupes = sorted({e for e in elems if elems.count(e) > 1})
            raise ValueError(f"duplicate labels in FinSet: {dupes}")
        self.elements = elems
        self._pos = {e: k for k, e in enumerate(elems)}

    def __iter__(self) -> Iterator[str]:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, label: object) -> bool:
        return label in self._pos

    def __getitem__(self, k: int) -> str:
        return self.elements[k]

    def __repr__(self) -> str:
        return f"FinSet({list(self.elements)})"

    def __hash__(self) -> int:
        return hash(self.elements)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FinSet) and self.elements == other.elements

    def index(self, label: str) -> int:
        try:
            return self._pos[label]
        except KeyError:
            raise KeyError(f"{label!r} is not an element of {self!r}") from None

    def same_elements(self, other: "FinSet") -> bool:
        return set(self.elements) == set(other.elements)


class FinMap:
    """A total function between finite sets, stored as an index array."""

    __slots__ = ("domain", "codomain", "_images")

    def __init__(self, domain: FinSet, codomain: FinSet, assignment: Mapping[str, str]):
        missing = [x for x in domain if x not in assignment]
        if missing:
            raise ValueError(f"map is not total, no image for {missing}")
        images = []
        for x in domain:
            y = assignment[x]
            if y not in codomain:
                raise ValueError(f"image {y!r} of {x!r} is not in the codomain {codomain!r}")
            images.append(codomain.index(y))
        self.domain = domain
        self.codomain = codomain
        self._images = np.asarray(images, dtype=np.intp)

    @classmethod
    def identity(cls, s: FinSet) -> "FinMap":
        return cls(s, s, {x: x for x in s})

    @classmethod
    def from_indices(cls, domain: FinSet, codomain: FinSet, indices: Iterable[int]) -> "FinMap":
        idx = list(indices)
        return cls(domain, codomain, {x: codomain[k] for x, k in zip(domain, idx)})

    def __call__(self, x: str) -> str:
        return self.codomain[int(self._images[self.domain.index(x)])]

    @property
    def indices(self) -> np.ndarray:
        return self._images.copy()

    def as_dict(self) -> dict[str, str]:
        return {x: self.codomain[int(k)] for x, k in zip(self.domain, self._images)}

    def then(self, g: "FinMap") -> "FinMap":
        """Return g∘self."""
        if g.domain != self.codomain:
            raise InterfaceMismatchError(
                f"cannot compose: codomain {self.codomain!r} differs from domain {g.domain!r}"
            )
        return FinMap.from_indices(self.domain, g.codomain, g._images[self._images])

    def image(self) -> list[str]:
        seen = sorted(set(int(k) for k in self._images))
        return [self.codomain[k] for k in seen]

    def is_injective(self) -> bool:
        return len(set(self._images.tolist())) == len(self._images)

    def matrix(self) -> np.ndarray:
        """The |codomain| x |domain| 0/1 matrix of the pushforward."""
        m = np.zeros((len(self.codomain), len(self.domain)))
        m[self._images, np.arange(len(self.domain))] = 1.0
        return m

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FinMap)
            and self.domain == other.domain
            and self.codomain == other.codomain
            and np.array_equal(self._images, other._images)
        )

    def __hash__(self) -> int:
        return hash((self.domain, self.codomain, tuple(self._images.tolist())))

    def __repr__(self) -> str:
        return f"FinMap({self.as_dict()})"


def pushforward(f: FinMap, v: np.ndarray) -> np.ndarray:
    """Sum the entries of ``v`` over each fibre of ``f``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (len(f.domain),):
        raise ValueError(f"vector of shape {v.shape} does not match |domain|={len(f.domain)}")
    out = np.zeros(len(f.codomain))
    np.add.at(out, f.indices, v)
    return out


def pullback(f: FinMap, w: np.ndarray) -> np.ndarray:
    """Copy ``w`` back along ``f``: (f^*w)(x) = w(f(x))."""
    w = np.asarray(w, dtype=float)
    if w.shape != (len(f.codomain),):
        raise ValueError(f"vector of shape {w.shape} does not match |codomain|={len(f.codomain)}")
    return w[f.indices].copy()


@dataclass(frozen=True)
class Cospan:
    left: FinSet
    apex: FinSet
    right: FinSet
    in_leg: FinMap
    out_leg: FinMap

    def __post_init__(self):
        if self.in_leg.domain != self.left or self.in_leg.codomain != self.apex:
            raise ValueError("in_leg must map left -> apex")
        if self.out_leg.domain != self.right or self.out_leg.codomain != self.apex:
            raise ValueError("out_leg must map right -> apex")

    @classmethod
    def from_legs(cls, apex: Iterable[str], inputs: Mapping[str, str], outputs: Mapping[str, str]) -> "Cospan":
        """Build a cospan from ``{interface label: apex label}`` dictionaries."""
        s = FinSet(apex)
        x = FinSet(inputs.keys())
        y = FinSet(outputs.keys())
        return cls(x, s, y, FinMap(x, s, inputs), FinMap(y, s, outputs))

    @classmethod
    def identity(cls, x: FinSet) -> "Cospan":
        return cls(x, x, x, FinMap.identity(x), FinMap.identity(x))

    def boundary(self) -> list[str]:
        """Apex elements hit by either leg, in apex order."""
        hit = set(self.in_leg.image()) | set(self.out_leg.image())
        return [s for s in self.apex if s in hit]

    def internal(self) -> list[str]:
        hit = set(self.in_leg.image()) | set(self.out_leg.image())
        return [s for s in self.apex if s not in hit]


@dataclass(frozen=True)
class PushoutResult:
    apex: FinSet
    quot_left: FinMap
    quot_right: FinMap


def _fresh(label: str, taken: set[str]) -> str:
    new = label + "'"
    while new in taken:
        new += "'"
    return new


def disjoint_union(a: FinSet, b: FinSet) -> tuple[FinSet, FinMap, FinMap]:
    """Coproduct a+b.  Labels of ``b`` that clash get primes appended."""
    taken = set(a.elements)
    renamed = {}
    for x in b:
        y = x if x not in taken else _fresh(x, taken | set(b.elements))
        renamed[x] = y
        taken.add(y)
    u = FinSet(list(a.elements) + [renamed[x] for x in b])
    return u, FinMap(a, u, {x: x for x in a}), FinMap(b, u, renamed)


def pushout(o: FinMap, i2: FinMap) -> PushoutResult:
    """Glue ``o.codomain`` and ``i2.codomain`` along their shared domain."""
    if not o.domain.same_elements(i2.domain):
        raise InterfaceMismatchError(
            f"pushout legs have different domains: {list(o.domain)} vs {list(i2.domain)}"
        )
    union, inl, inr = disjoint_union(o.codomain, i2.codomain)
    parent = list(range(len(union)))

    def find(k: int) -> int:
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for y in o.domain:
        a = find(union.index(inl(o(y))))
        b = find(union.index(inr(i2(y))))
        if a != b:
            parent[max(a, b)] = min(a, b)

    classes: dict[int, list[str]] = {}
    for k, lab in enumerate(union):
        classes.setdefault(find(k), []).append(lab)
    rep = {root: min(members) for root, members in classes.items()}

    apex_labels: list[str] = []
    for k in range(len(union)):
        r = rep[find(k)]
        if r not in apex_labels:
            apex_labels.append(r)
    apex = FinSet(apex_labels)
    to_apex = {lab: rep[find(k)] for k, lab in enumerate(union)}
    j = FinMap(o.codomain, apex, {s: to_apex[inl(s)] for s in o.codomain})
    j2 = FinMap(i2.codomain, apex, {s: to_apex[inr(s)] for s in i2.codomain})
    return PushoutResult(apex, j, j2)


def glue(c1: Cospan, c2: Cospan) -> tuple[Cospan, PushoutResult]:
    """Compose two cospans and also return the pushout used to do it."""
    if not c1.right.same_elements(c2.left):
        raise InterfaceMismatchError(
            f"interfaces do not match: {list(c1.right)} vs {list(c2.left)}"
        )
    po = pushout(c1.out_leg, c2.in_leg)
    composite = Cospan(
        c1.left,
        po.apex,
        c2.right,
        c1.in_leg.then(po.quot_left),
        c2.out_leg.then(po.quot_right),
    )
    return composite, po


def compose_cospans(c1: Cospan, c2: Cospan) -> Cospan:
    return glue(c1, c2)[0]


def tensor_cospans(c1: Cospan, c2: Cospan) -> tuple[Cospan, FinMap, FinMap]:
    """Disjoint union of two cospans.

    Returns the tensor cospan and the two apex inclusions (needed to carry
    decorations across).
    """
    apex, a1, a2 = disjoint_union(c1.apex, c2.apex)
    left, l1, l2 = disjoint_union(c1.left, c2.left)
    right, r1, r2 = disjoint_union(c1.right, c2.right)
    in_map = {}
    for x in c1.left:
        in_map[l1(x)] = a1(c1.in_leg(x))
    for x in c2.left:
        in_map[l2(x)] = a2(c2.in_leg(x))
    out_map = {}
    for y in c1.right:
        out_map[r1(y)] = a1(c1.out_leg(y))
    for y in c2.right:
        out_map[r2(y)] = a2(c2.out_leg(y))
    c = Cospan(left, apex, right, FinMap(left, apex, in_map), FinMap(right, apex, out_map))
    return c, a1, a2
