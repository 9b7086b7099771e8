"""Solver-backed steady-state behavior of open mass-action systems.

For an open dynamical system ``(i: X -> S <- Y: o, v)`` the behavior is the
set of boundary tuples ``(i^* c, I, o^* c, O)`` for which some ``c`` in R^S
satisfies ``v(c) + i_* I - o_* O = 0``.  The set is semialgebraic and is
handled here through an oracle:

* ``membership`` fixes the boundary concentrations from the tuple and
  searches for the internal ones.  "no" is only returned with a
  certificate (a residual that no choice of internal concentrations can
  remove); a failed numerical search gives "unknown".
* ``sample`` draws boundary concentrations, solves for internal steady
  states and then for boundary flows.

Concentrations of any sign are accepted; negative ones are flagged as
unphysical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, NamedTuple, Sequence

import numpy as np

from .behavior_markov import steady_relation
from .errors import NonlinearFieldError
from .finset import glue, pullback
from .linrel import LinRel, null_space
from .open_reaction import OpenDynam, compose_dynam


@dataclass(frozen=True)
class SolverSettings:
    starts: int = 32
    box: tuple[float, float] = (0.0, 10.0)
    max_iter: int = 100
    max_halvings: int = 20
    residual_tol: float = 1e-10
    rank_tol: float = 1e-9

    def __post_init__(self):
        if self.starts < 1 or self.max_iter < 1 or self.max_halvings < 0:
            raise ValueError("solver counts must be positive")
        if not (self.residual_tol > 0 and self.rank_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.box[0] < self.box[1]:
            raise ValueError("box must be a nonempty interval")


@dataclass(frozen=True, eq=False)
class BoundaryTuple:
    in_conc: np.ndarray
    inflow: np.ndarray
    out_conc: np.ndarray
    outflow: np.ndarray
    witness: np.ndarray | None = field(default=None, compare=False)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.in_conc, self.inflow, self.out_conc, self.outflow])


class MembershipResult(NamedTuple):
    verdict: Literal["yes", "no", "unknown"]
    witness: np.ndarray | None
    residual: float
    unphysical: bool
    reason: str


class NewtonResult(NamedTuple):
    x: np.ndarray
    residual: float
    converged: bool


def gauss_newton(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iter: int = 100,
    max_halvings: int = 20,
    polish: bool = False,
) -> NewtonResult:
    """Damped Gauss-Newton with least-squares steps and step halving.

    Stops once the max-norm residual is below ``tol`` (or, with ``polish``,
    once no further decrease is possible).
    """
    x = np.asarray(x0, dtype=float).copy()
    r = fun(x)
    norm = float(np.linalg.norm(r))
    converged = bool(np.abs(r).max(initial=0.0) <= tol)
    for _ in range(max_iter):
        if converged and not polish:
            break
        if not np.all(np.isfinite(r)):
            break
        step, *_ = np.linalg.lstsq(jac(x), r, rcond=None)
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = x - lam * step
            rt = fun(trial)
            nt = float(np.linalg.norm(rt))
            if np.all(np.isfinite(rt)) and nt < norm:
                break
            lam *= 0.5
        else:
            break
        x, r, norm = trial, rt, nt
        converged = bool(np.abs(r).max(initial=0.0) <= tol)
    return NewtonResult(x, float(np.abs(r).max(initial=0.0)), converged)


class BehaviorOracle:
    """Membership and sampling for the steady-state behavior of an open system."""

    def __init__(self, system: OpenDynam, settings: SolverSettings | None = None, seed: int = 0):
        self.system = system
        self.settings = settings or SolverSettings()
        self.seed = seed
        cs = system.cospan
        self.n = len(system.species)
        self.nx, self.ny = len(cs.left), len(cs.right)
        self.boundary = np.array([system.species.index(s) for s in cs.boundary()], dtype=np.intp)
        self.internal = np.array([system.species.index(s) for s in cs.internal()], dtype=np.intp)
        self.ipush = cs.in_leg.matrix()
        self.opush = cs.out_leg.matrix()
        self.affine_internal = system.field.degree_in(self.internal.tolist()) <= 1
        inner = self.internal.tolist()
        self.rows_free_of_internal = np.array(
            [all(sum(e[k] for k in inner) == 0 for e in comp) for comp in system.field.components], dtype=bool
        )

    # -- helpers -----------------------------------------------------
    def _scale(self, c: np.ndarray, drive: np.ndarray) -> float:
        _, coeff = self.system.field._compile()
        terms = np.abs(coeff) * np.abs(self.system.field.monomials(c))[None, :]
        return max(1.0, float(terms.max(initial=0.0)), float(np.abs(drive).max(initial=0.0)))

    def _starts(self, k: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.settings.box
        return rng.uniform(lo, hi, size=(self.settings.starts, k))

    def boundary_tuple(self, c: np.ndarray, inflow, outflow) -> BoundaryTuple:
        cs = self.system.cospan
        return BoundaryTuple(
            pullback(cs.in_leg, c), np.asarray(inflow, float), pullback(cs.out_leg, c), np.asarray(outflow, float), c
        )

    def _check_shapes(self, t: BoundaryTuple) -> None:
        shapes = (np.shape(t.in_conc), np.shape(t.inflow), np.shape(t.out_conc), np.shape(t.outflow))
        want = ((self.nx,), (self.nx,), (self.ny,), (self.ny,))
        if shapes != want:
            raise ValueError(f"boundary tuple has shapes {shapes}, expected {want}")

    # -- membership --------------------------------------------------
    def membership(self, t: BoundaryTuple, hints: Sequence[np.ndarray] = ()) -> MembershipResult:
        self._check_shapes(t)
        tol = self.settings.residual_tol
        cs = self.system.cospan
        # boundary concentrations, checking that repeated labels agree
        c = np.zeros(self.n)
        seen = np.zeros(self.n, dtype=bool)
        for leg, vals in ((cs.in_leg, t.in_conc), (cs.out_leg, t.out_conc)):
            for k, s in enumerate(leg.indices):
                v = float(vals[k])
                if seen[s] and abs(c[s] - v) > tol * max(1.0, abs(v)):
                    return MembershipResult(
                        "no", None, abs(c[s] - v), False,
                        f"species {self.system.species[s]!r} is given two concentrations {c[s]} and {v}",
                    )
                c[s], seen[s] = v, True
        drive = self.ipush @ np.asarray(t.inflow, float) - self.opush @ np.asarray(t.outflow, float)
        field_ = self.system.field
        ii = self.internal

        def fun(z):
            x = c.copy()
            x[ii] = z
            return field_(x) + drive

        def jac(z):
            x = c.copy()
            x[ii] = z
            return field_.jacobian(x)[:, ii]

        def done(z, res, reason):
            x = c.copy()
            x[ii] = z
            return MembershipResult("yes", x, res, bool((x < 0).any()), reason)

        if ii.size == 0:
            r = fun(np.zeros(0))
            res = float(np.abs(r).max(initial=0.0))
            if res <= tol * self._scale(c, drive):
                return done(np.zeros(0), res, "no internal species; direct evaluation")
            return MembershipResult("no", None, res, bool((c < 0).any()), "no internal species; direct evaluation")

        # rows that do not involve internal species are a direct certificate
        fixed_rows = self.rows_free_of_internal
        if fixed_rows.any():
            r0 = fun(np.zeros(ii.size))[fixed_rows]
            res0 = float(np.abs(r0).max())
            if res0 > tol * self._scale(c, drive):
                return MembershipResult(
                    "no", None, res0, bool((c < 0).any()), "residual in rows free of internal species"
                )

        if self.affine_internal:
            z0 = np.zeros(ii.size)
            b = fun(z0)
            a = jac(z0)
            z, *_ = np.linalg.lstsq(a, -b, rcond=None)
            r = a @ z + b
            x = c.copy()
            x[ii] = z
            scale = self._scale(x, drive)
            res = float(np.abs(r).max(initial=0.0))
            if res <= tol * scale:
                return done(z, res, "affine in internal species; least-squares solve")
            if np.linalg.norm(r) > math.sqrt(r.size) * tol * scale:
                return MembershipResult(
                    "no", None, res, bool((c < 0).any()), "affine in internal species; least-squares residual certificate"
                )
            return MembershipResult("unknown", None, res, bool((c < 0).any()), "affine residual in the gap")

        rng = np.random.default_rng(self.seed)
        starts = list(hints) + list(self._starts(ii.size, rng))
        best = math.inf
        for z0 in starts:
            z0 = np.asarray(z0, float)
            if z0.shape != (ii.size,):
                z0 = z0[ii]
            out = gauss_newton(fun, jac, z0, tol, self.settings.max_iter, self.settings.max_halvings)
            x = c.copy()
            x[ii] = out.x
            if out.residual <= tol * self._scale(x, drive):
                return done(out.x, out.residual, "Gauss-Newton multistart")
            best = min(best, out.residual)
        return MembershipResult("unknown", None, best, bool((c < 0).any()), "no start converged")

    # -- steady states ----------------------------------------------
    def steady_states(
        self,
        boundary_conc: np.ndarray,
        conservation: Sequence[tuple[np.ndarray, float]] = (),
        rng: np.random.Generator | None = None,
        first_only: bool = False,
    ) -> list[np.ndarray]:
        """Distinct solutions of the internal equations ``v_I(c) = 0``.

        ``boundary_conc`` gives the concentrations of boundary species (in
        apex order).  Extra linear constraints ``w . c = total`` can be
        added, e.g. conserved quantities of a closed system.
        """
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        ii = self.internal
        c = np.zeros(self.n)
        c[self.boundary] = boundary_conc
        if ii.size == 0:
            return [c]
        field_ = self.system.field
        cons_w = np.array([np.asarray(w, float) for w, _ in conservation]).reshape(len(conservation), self.n)
        cons_t = np.array([float(t) for _, t in conservation])

        def fun(z):
            x = c.copy()
            x[ii] = z
            return np.concatenate([field_(x)[ii], cons_w @ x - cons_t])

        def jac(z):
            x = c.copy()
            x[ii] = z
            return np.vstack([field_.jacobian(x)[np.ix_(ii, ii)], cons_w[:, ii]])

        tol = self.settings.residual_tol
        found: list[np.ndarray] = []
        for z0 in self._starts(ii.size, rng):
            out = gauss_newton(fun, jac, z0, tol, self.settings.max_iter, self.settings.max_halvings, polish=not first_only)
            x = c.copy()
            x[ii] = out.x
            if out.residual > tol * self._scale(x, np.zeros(self.n)):
                continue
            if not any(np.abs(x - y).max() <= 1e-6 * max(1.0, np.abs(y).max()) for y in found):
                found.append(x)
            if first_only:
                break
        return found

    # -- sampling ----------------------------------------------------
    def flows_for(self, c: np.ndarray, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Boundary flows (I, O) balancing ``v(c)``; kernel directions get Gaussian weights."""
        v = self.system.field(c)
        g = np.hstack([self.ipush, -self.opush])
        bi = self.boundary
        gb = g[bi]
        rhs = -v[bi]
        flows = np.linalg.pinv(gb) @ rhs if gb.size else np.zeros(self.nx + self.ny)
        if rng is not None and gb.shape[1]:
            ker = null_space(gb, self.settings.rank_tol) if gb.shape[0] else np.eye(gb.shape[1])
            if ker.shape[1]:
                flows = flows + ker @ rng.standard_normal(ker.shape[1])
        return flows[: self.nx], flows[self.nx :]

    def sample(self, n: int, seed: int | None = None) -> list[BoundaryTuple]:
        """Up to ``n`` behavior tuples, each carrying its witness concentration."""
        rng = np.random.default_rng(self.seed if seed is None else seed)
        lo, hi = self.settings.box
        out: list[BoundaryTuple] = []
        attempts = 0
        while len(out) < n and attempts < 4 * n + 16:
            attempts += 1
            cb = rng.uniform(lo, hi, size=self.boundary.size)
            sols = self.steady_states(cb, rng=rng, first_only=True)
            if not sols:
                continue
            c = sols[0]
            inflow, outflow = self.flows_for(c, rng)
            out.append(self.boundary_tuple(c, inflow, outflow))
        return out


@dataclass
class FunctorialityReport:
    checked: int = 0
    passed: int = 0
    failed: int = 0
    unknown: int = 0
    failures: list = field(default_factory=list)

    def add(self, verdict: str, info: dict | None = None) -> None:
        self.checked += 1
        if verdict == "pass":
            self.passed += 1
        elif verdict == "fail":
            self.failed += 1
            self.failures.append(info or {})
        else:
            self.unknown += 1

    def as_dict(self) -> dict:
        return {
            "checked": self.checked,
            "passed": self.passed,
            "failed": self.failed,
            "unknown": self.unknown,
            "failures": self.failures[:20],
        }


def check_functoriality_rx(
    f1: OpenDynam,
    f2: OpenDynam,
    n: int = 100,
    seed: int = 0,
    tol: float = 1e-8,
    settings: SolverSettings | None = None,
) -> dict:
    """Compare the black box of ``f2 . f1`` with the relational composite of the black boxes.

    Forward: composite samples are split along the pushout; the middle
    flows are solved for and both halves must be accepted by the component
    oracles.  Backward: matched pairs are built from the component fields
    (sharing middle concentrations and flows) and the glued outer tuple
    must be accepted by the composite oracle.
    """
    settings = settings or SolverSettings()
    comp = compose_dynam(f1, f2)
    _, po = glue(f1.cospan, f2.cospan)
    seeds = np.random.SeedSequence(seed).spawn(3)
    o1 = BehaviorOracle(f1, settings, int(seeds[0].generate_state(1)[0]))
    o2 = BehaviorOracle(f2, settings, int(seeds[1].generate_state(1)[0]))
    oc = BehaviorOracle(comp, settings, int(seeds[2].generate_state(1)[0]))
    rng = np.random.default_rng(seeds[2])
    forward, backward = FunctorialityReport(), FunctorialityReport()

    a_mid = np.vstack([o1.opush, o2.ipush])

    for t in oc.sample(n, seed):
        c1 = pullback(po.quot_left, t.witness)
        c2 = pullback(po.quot_right, t.witness)
        rhs = np.concatenate([f1.field(c1) + o1.ipush @ t.inflow, o2.opush @ t.outflow - f2.field(c2)])
        mid, *_ = np.linalg.lstsq(a_mid, rhs, rcond=None) if a_mid.shape[1] else (np.zeros(0),)
        res = float(np.abs(a_mid @ mid - rhs).max(initial=0.0))
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        if res > tol * scale:
            forward.add("fail", {"direction": "forward", "reason": "no middle flow", "residual": res})
            continue
        t1 = BoundaryTuple(t.in_conc, t.inflow, pullback(f1.cospan.out_leg, c1), mid)
        t2 = BoundaryTuple(pullback(f2.cospan.in_leg, c2), mid, t.out_conc, t.outflow)
        v1, v2 = o1.membership(t1).verdict, o2.membership(t2).verdict
        if "no" in (v1, v2):
            forward.add("fail", {"direction": "forward", "verdicts": [v1, v2], "tuple": t.as_vector().tolist()})
        elif "unknown" in (v1, v2):
            forward.add("unknown")
        else:
            forward.add("pass")

    for _ in range(n):
        pair = _matched_pair(o1, o2, po, rng, tol)
        if pair is None:
            backward.add("unknown")
            continue
        t1, t2 = pair
        if o1.membership(t1).verdict != "yes" or o2.membership(t2).verdict != "yes":
            backward.add("unknown")
            continue
        glued = BoundaryTuple(t1.in_conc, t1.inflow, t2.out_conc, t2.outflow)
        verdict = oc.membership(glued).verdict
        if verdict == "yes":
            backward.add("pass")
        elif verdict == "no":
            backward.add("fail", {"direction": "backward", "tuple": glued.as_vector().tolist()})
        else:
            backward.add("unknown")

    total = FunctorialityReport(
        forward.checked + backward.checked,
        forward.passed + backward.passed,
        forward.failed + backward.failed,
        forward.unknown + backward.unknown,
        forward.failures + backward.failures,
    )
    report = total.as_dict()
    report["forward"] = forward.as_dict()
    report["backward"] = backward.as_dict()
    return report


def _matched_pair(o1: BehaviorOracle, o2: BehaviorOracle, po, rng: np.random.Generator, tol: float):
    """Tuples of both behaviors sharing middle concentrations and flows.

    Outer boundary concentrations are drawn at random on the glued species
    set and copied back to both sides; the remaining concentrations and all
    flows are found by Gauss-Newton on the joint system made of both
    steady-state equations and the gluing condition.
    """
    f1, f2 = o1.system, o2.system
    cs1, cs2 = f1.cospan, f2.cospan
    n1, n2 = o1.n, o2.n
    lo, hi = o1.settings.box
    outer = np.zeros(len(po.apex), dtype=bool)
    outer[cs1.in_leg.then(po.quot_left).indices] = True
    outer[cs2.out_leg.then(po.quot_right).indices] = True
    glued = np.where(outer, rng.uniform(lo, hi, len(po.apex)), 0.0)
    fixed1 = outer[po.quot_left.indices]
    fixed2 = outer[po.quot_right.indices]
    c1 = pullback(po.quot_left, glued)
    c2 = pullback(po.quot_right, glued)
    free1, free2 = np.flatnonzero(~fixed1), np.flatnonzero(~fixed2)
    nx, ny, nz = o1.nx, o1.ny, o2.ny
    k1, k2 = free1.size, free2.size
    pull_o1 = cs1.out_leg.matrix().T
    pull_i2 = cs2.in_leg.matrix().T

    def unpack(z):
        a, b = c1.copy(), c2.copy()
        a[free1] = z[:k1]
        b[free2] = z[k1 : k1 + k2]
        flows = z[k1 + k2 :]
        return a, b, flows[:nx], flows[nx : nx + ny], flows[nx + ny :]

    def fun(z):
        a, b, i_, m_, o_ = unpack(z)
        return np.concatenate([
            f1.field(a) + o1.ipush @ i_ - o1.opush @ m_,
            f2.field(b) + o2.ipush @ m_ - o2.opush @ o_,
            pull_o1 @ a - pull_i2 @ b,
        ])

    def jac(z):
        a, b, *_ = unpack(z)
        rows = n1 + n2 + ny
        j = np.zeros((rows, z.size))
        j[:n1, :k1] = f1.field.jacobian(a)[:, free1]
        j[n1 : n1 + n2, k1 : k1 + k2] = f2.field.jacobian(b)[:, free2]
        j[n1 + n2 :, :k1] = pull_o1[:, free1]
        j[n1 + n2 :, k1 : k1 + k2] = -pull_i2[:, free2]
        off = k1 + k2
        j[:n1, off : off + nx] = o1.ipush
        j[:n1, off + nx : off + nx + ny] = -o1.opush
        j[n1 : n1 + n2, off + nx : off + nx + ny] = o2.ipush
        j[n1 : n1 + n2, off + nx + ny :] = -o2.opush
        return j

    for _ in range(o1.settings.starts):
        z0 = np.concatenate([rng.uniform(lo, hi, k1 + k2), np.zeros(nx + ny + nz)])
        out = gauss_newton(fun, jac, z0, o1.settings.residual_tol, o1.settings.max_iter, o1.settings.max_halvings)
        a, b, i_, m_, o_ = unpack(out.x)
        scale = max(o1._scale(a, np.zeros(n1)), o2._scale(b, np.zeros(n2)))
        if out.residual <= o1.settings.residual_tol * scale:
            t1 = BoundaryTuple(pullback(cs1.in_leg, a), i_, pullback(cs1.out_leg, a), m_, a)
            t2 = BoundaryTuple(pullback(cs2.in_leg, b), m_, pullback(cs2.out_leg, b), o_, b)
            return t1, t2
    return None


def linear_behavior_bridge(f: OpenDynam, tol: float = 1e-9) -> LinRel:
    """Black box of a homogeneous linear open system as an exact linear relation."""
    if f.field.degree() > 1:
        raise NonlinearFieldError(f"field has degree {f.field.degree()}, the bridge needs degree at most 1")
    try:
        a = f.field.linear_matrix()
    except ValueError:
        raise NonlinearFieldError("field has constant terms, so its behavior is affine, not linear") from None
    return steady_relation(a, f.cospan, tol)
