"""Reaction networks and their mass-action polynomial vector fields.

Polynomial coefficients are stored as exact :class:`fractions.Fraction`
values (a float rate converts exactly), so fields assembled in different
orders compare equal term by term.  Floats are only produced when a field
is evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NumericalError
from .finset import FinMap, FinSet
from .linrel import null_space
from .markov import MarkovProcess

Monomial = tuple[int, ...]


@dataclass(frozen=True)
class Transition:
    name: str
    source: tuple[int, ...]
    target: tuple[int, ...]
    rate: Real


def _complex(species: FinSet, counts: Mapping[str, int] | Sequence[int]) -> tuple[int, ...]:
    if isinstance(counts, Mapping):
        out = [0] * len(species)
        for s, k in counts.items():
            if int(k) != k or k < 0:
                raise ValueError(f"stoichiometric coefficient {k!r} of {s!r} is not a natural number")
            if s not in species:
                raise ValueError(f"unknown species {s!r}")
            out[species.index(s)] += int(k)
        return tuple(out)
    counts = tuple(int(k) for k in counts)
    if len(counts) != len(species) or any(k < 0 for k in counts):
        raise ValueError("complex must be a nonnegative integer vector over the species")
    return counts


class ReactionNetwork:
    """Species, transitions with source/target complexes, and positive rate constants."""

    def __init__(self, species: Iterable[str] | FinSet, transitions: Iterable[Transition | tuple]):
        self.species = species if isinstance(species, FinSet) else FinSet(species)
        built = []
        for k, tr in enumerate(transitions):
            if not isinstance(tr, Transition):
                name, src, tgt, rate = tr
                tr = Transition(name, src, tgt, rate)
            rate = tr.rate
            if isinstance(rate, bool) or not isinstance(rate, Real) or not rate > 0 or not math.isfinite(rate):
                raise ValueError(f"transition {tr.name!r} has invalid rate {rate!r}")
            built.append(
                Transition(
                    str(tr.name),
                    _complex(self.species, tr.source),
                    _complex(self.species, tr.target),
                    rate,
                )
            )
        names = [t.name for t in built]
        if len(set(names)) != len(names):
            raise ValueError("transition names must be distinct")
        self.transitions: tuple[Transition, ...] = tuple(built)

    def __repr__(self) -> str:
        return f"ReactionNetwork(species={list(self.species)}, transitions={[t.name for t in self.transitions]})"

    def stoichiometry(self) -> np.ndarray:
        """Species x transitions matrix of net changes ``t(tau) - s(tau)``."""
        m = np.zeros((len(self.species), len(self.transitions)))
        for k, t in enumerate(self.transitions):
            m[:, k] = np.subtract(t.target, t.source)
        return m


def _grlex_key(e: Monomial):
    return (sum(e), e)


class PolyVectorField:
    """A polynomial vector field on R^S: one sparse polynomial per species."""

    def __init__(self, species: FinSet, components: Sequence[Mapping[Monomial, Fraction]]):
        if len(components) != len(species):
            raise ValueError("need exactly one component per species")
        n = len(species)
        comps = []
        for comp in components:
            clean = {}
            for e, c in comp.items():
                e = tuple(int(k) for k in e)
                if len(e) != n or any(k < 0 for k in e):
                    raise ValueError(f"bad exponent vector {e!r}")
                c = Fraction(c)
                if c != 0:
                    clean[e] = clean.get(e, Fraction(0)) + c
            comps.append({e: c for e, c in clean.items() if c != 0})
        self.species = species
        self.components: tuple[dict[Monomial, Fraction], ...] = tuple(comps)
        self._compiled = None

    # -- algebra -----------------------------------------------------
    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PolyVectorField)
            and self.species == other.species
            and self.components == other.components
        )

    def __hash__(self):
        return hash((self.species, tuple(tuple(sorted(c.items())) for c in self.components)))

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        if self.species != other.species:
            raise ValueError("fields live on different species sets")
        comps = []
        for a, b in zip(self.components, other.components):
            c = dict(a)
            for e, k in b.items():
                c[e] = c.get(e, Fraction(0)) + k
            comps.append(c)
        return PolyVectorField(self.species, comps)

    @classmethod
    def zero(cls, species: FinSet) -> "PolyVectorField":
        return cls(species, [{} for _ in species])

    def degree(self) -> int:
        return max((sum(e) for comp in self.components for e in comp), default=0)

    def degree_in(self, indices: Iterable[int]) -> int:
        """Largest total degree in the given variables over all terms."""
        idx = list(indices)
        return max((sum(e[k] for k in idx) for comp in self.components for e in comp), default=0)

    def terms(self, k: int) -> list[tuple[Monomial, Fraction]]:
        """Terms of component ``k`` in graded lexicographic order, largest first."""
        comp = self.components[k]
        return [(e, comp[e]) for e in sorted(comp, key=_grlex_key, reverse=True)]

    def linear_matrix(self) -> np.ndarray:
        """Matrix ``A`` with ``v(c) = A c`` when the field is homogeneous linear."""
        n = len(self.species)
        a = np.zeros((n, n))
        for i, comp in enumerate(self.components):
            for e, c in comp.items():
                if sum(e) != 1:
                    raise ValueError("field is not homogeneous of degree one")
                a[i, e.index(1)] += float(c)
        return a

    def format(self) -> str:
        lines = []
        for k, s in enumerate(self.species):
            parts = []
            for e, c in self.terms(k):
                mono = "*".join(
                    (sp if p == 1 else f"{sp}^{p}") for sp, p in zip(self.species, e) if p
                )
                coeff = str(c) if c.denominator != 1 else str(c.numerator)
                parts.append(f"({coeff})*{mono}" if mono else f"({coeff})")
            lines.append(f"d{s}/dt = " + (" + ".join(parts) if parts else "0"))
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"PolyVectorField(species={list(self.species)}, degree={self.degree()})"

    # -- numerics ----------------------------------------------------
    def _compile(self):
        if self._compiled is None:
            monos = sorted({e for comp in self.components for e in comp}, key=_grlex_key)
            n = len(self.species)
            expo = np.array(monos, dtype=float).reshape(len(monos), n)
            coeff = np.zeros((n, len(monos)))
            pos = {e: k for k, e in enumerate(monos)}
            for i, comp in enumerate(self.components):
                for e, c in comp.items():
                    coeff[i, pos[e]] = float(c)
            self._compiled = (expo, coeff)
        return self._compiled

    def monomials(self, c: np.ndarray) -> np.ndarray:
        expo, _ = self._compile()
        c = np.asarray(c, dtype=float)
        return np.prod(c[None, :] ** expo, axis=1) if expo.size else np.ones(expo.shape[0])

    def __call__(self, c: np.ndarray) -> np.ndarray:
        _, coeff = self._compile()
        return coeff @ self.monomials(c)

    def jacobian(self, c: np.ndarray) -> np.ndarray:
        expo, coeff = self._compile()
        c = np.asarray(c, dtype=float)
        n = len(self.species)
        dmono = np.zeros((expo.shape[0], n))
        for l in range(n):
            has = expo[:, l] > 0
            if not has.any():
                continue
            lowered = expo[has].copy()
            lowered[:, l] -= 1
            dmono[has, l] = expo[has, l] * np.prod(c[None, :] ** lowered, axis=1)
        return coeff @ dmono


def mass_action_field(r: ReactionNetwork) -> PolyVectorField:
    """``v(c) = sum_tau r(tau) (t(tau) - s(tau)) c^s(tau)``."""
    comps: list[dict[Monomial, Fraction]] = [{} for _ in r.species]
    for t in r.transitions:
        rate = Fraction(t.rate)
        for k, (a, b) in enumerate(zip(t.source, t.target)):
            if a != b:
                comps[k][t.source] = comps[k].get(t.source, Fraction(0)) + rate * (b - a)
    return PolyVectorField(r.species, comps)


def evaluate(v: PolyVectorField, c: np.ndarray) -> np.ndarray:
    return v(c)


def _rk4(f, c, h):
    k1 = f(c)
    k2 = f(c + 0.5 * h * k1)
    k3 = f(c + 0.5 * h * k2)
    k4 = f(c + h * k3)
    return c + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_guarded(f, c: np.ndarray, dt: float, nonneg: bool, max_halvings: int = 20) -> np.ndarray:
    """Advance by ``dt`` with RK4, splitting the step while it drives ``c`` below -1e-9."""
    pieces = 1
    for _ in range(max_halvings + 1):
        x = c.copy()
        ok = True
        for _ in range(pieces):
            # overflow shows up as a non-finite state and is handled below
            with np.errstate(over="ignore", invalid="ignore"):
                x = _rk4(f, x, dt / pieces)
            if not np.all(np.isfinite(x)) or (nonneg and (x < -1e-9).any()):
                ok = False
                break
        if ok:
            return x
        pieces *= 2
    raise NumericalError(f"step of size {dt} rejected after {max_halvings} halvings")


def integrate_rate_equation(
    v: PolyVectorField, c0: np.ndarray, t: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """RK4 trajectory of ``dc/dt = v(c)`` sampled every ``dt`` (last step shortened)."""
    if dt <= 0:
        raise ValueError("step must be positive")
    c = np.asarray(c0, dtype=float).copy()
    nonneg = bool((c >= 0).all())
    times = [0.0]
    traj = [c.copy()]
    n = math.ceil(t / dt - 1e-12) if t > 0 else 0
    for k in range(n):
        h = min(dt, t - k * dt)
        c = rk4_guarded(v, c, h, nonneg)
        times.append(min(t, (k + 1) * dt))
        traj.append(c.copy())
    return np.array(times), np.array(traj)


def map_network(f: FinMap, r: ReactionNetwork) -> ReactionNetwork:
    """Relabel species along ``f``, adding up coefficients of merged species."""
    if f.domain != r.species:
        raise ValueError("map domain must be the species set of the network")
    idx = f.indices
    out = []
    for t in r.transitions:
        src = np.zeros(len(f.codomain), dtype=int)
        tgt = np.zeros(len(f.codomain), dtype=int)
        np.add.at(src, idx, np.array(t.source, dtype=int))
        np.add.at(tgt, idx, np.array(t.target, dtype=int))
        out.append(Transition(t.name, tuple(int(k) for k in src), tuple(int(k) for k in tgt), t.rate))
    return ReactionNetwork(f.codomain, out)


def push_pull_field(f: FinMap, v: PolyVectorField) -> PolyVectorField:
    """``f_* . v . f^*`` as a polynomial field on ``f.codomain``.

    Pulling back substitutes ``c_s = c'_{f(s)}``, which pushes exponent
    vectors forward; pushing forward adds component ``s`` into ``f(s)``.
    """
    if f.domain != v.species:
        raise ValueError("map domain must be the species set of the field")
    idx = f.indices
    m = len(f.codomain)
    comps: list[dict[Monomial, Fraction]] = [{} for _ in range(m)]
    for s, comp in enumerate(v.components):
        tgt = comps[int(idx[s])]
        for e, c in comp.items():
            pushed = [0] * m
            for k, p in enumerate(e):
                pushed[int(idx[k])] += p
            key = tuple(pushed)
            tgt[key] = tgt.get(key, Fraction(0)) + c
    return PolyVectorField(f.codomain, comps)


def markov_as_reaction(m: MarkovProcess) -> ReactionNetwork:
    """Each edge s -> t with rate r becomes the transition s -> t with rate r."""
    out = []
    for e in m.edges:
        out.append(Transition(e.id, {e.source: 1}, {e.target: 1}, e.rate))
    return ReactionNetwork(m.states, out)


def conservation_laws(r: ReactionNetwork, tol: float = 1e-10) -> np.ndarray:
    """Rows ``w`` with ``w . (t(tau) - s(tau)) = 0`` for every transition."""
    st = r.stoichiometry()
    if st.shape[1] == 0:
        return np.eye(len(r.species))
    return null_space(st.T, tol).T
