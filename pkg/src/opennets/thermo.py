"""Relative entropy, f-divergences, dissipation and their time derivatives.

Conventions used throughout:

* ``x = p / q`` is the likelihood ratio against a reference ``q``;
* ``Dp_i/Dt = dp_i/dt - (H p)_i`` is the part of the change at a boundary
  state that is *not* explained by the process itself (zero on internal
  states by the open master equation);
* when the caller does not supply boundary derivatives they default to
  zero, which is the fixed-boundary case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .errors import DomainError, NotSteadyError, NumericalError
from .open_markov import OpenDetailedBalanced, OpenMarkov, _boundary_vector


class ConvexFn:
    """A convex function on (0, inf) together with its derivative.

    A midpoint convexity spot check on a fixed grid of random pairs runs at
    construction, so an obviously non-convex function is rejected early.
    """

    def __init__(
        self,
        f: Callable,
        f_prime: Callable,
        name: str = "f",
        check: bool = True,
        f_second: Callable | None = None,
    ):
        self.f = f
        self.f_prime = f_prime
        self.f_second = f_second
        self.name = name
        if check:
            rng = np.random.default_rng(12345)
            a = rng.uniform(1e-3, 10.0, 100)
            b = rng.uniform(1e-3, 10.0, 100)
            mid = self.f(0.5 * (a + b))
            chord = 0.5 * (self.f(a) + self.f(b))
            if (mid > chord + 1e-12 * (1 + np.abs(chord))).any():
                raise ValueError(f"{name} failed the midpoint convexity check")

    def __call__(self, x):
        return self.f(x)

    def __repr__(self) -> str:
        return f"ConvexFn({self.name})"


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _recip(x):
    return 1.0 / np.asarray(x, dtype=float)


KL = ConvexFn(lambda x: _xlogx(x) - x + 1.0, lambda x: np.log(x), "x ln x - x + 1", f_second=_recip)
X_LOG_X = ConvexFn(_xlogx, lambda x: np.log(x) + 1.0, "x ln x", f_second=_recip)
QUADRATIC = ConvexFn(
    lambda x: 0.5 * np.asarray(x, dtype=float) ** 2,
    lambda x: np.asarray(x, dtype=float),
    "x^2/2",
    f_second=lambda x: np.ones_like(np.asarray(x, dtype=float)),
)


def smooth_abs(delta: float = 0.1) -> ConvexFn:
    """A smoothed ``|x - 1|``."""
    def root(x):
        return np.sqrt((np.asarray(x, dtype=float) - 1.0) ** 2 + delta**2)

    return ConvexFn(
        lambda x: root(x) - delta,
        lambda x: (np.asarray(x, dtype=float) - 1.0) / root(x),
        f"smooth |x-1| (delta={delta})",
        f_second=lambda x: delta**2 / root(x) ** 3,
    )


class EntropyReport(NamedTuple):
    value: float
    rate: float
    internal_term: float
    boundary_term: float


def relative_entropy(p: np.ndarray, q: np.ndarray) -> float:
    """Generalised relative entropy ``sum p ln(p/q) - (p - q)``.

    Uses ``0 ln 0 = 0`` and returns ``inf`` when some ``q_i = 0 < p_i``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if (p < 0).any() or (q < 0).any():
        raise DomainError("relative entropy needs nonnegative vectors")
    if ((q == 0) & (p > 0)).any():
        return math.inf
    pos = p > 0
    total = float(np.sum(p[pos] * np.log(p[pos] / q[pos])))
    return total - float(np.sum(p - q))


def f_divergence(p: np.ndarray, q: np.ndarray, f: ConvexFn) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if (q <= 0).any():
        raise DomainError("f-divergence needs a strictly positive reference")
    return float(np.sum(q * f(p / q)))


def _boundary_derivatives(m: OpenMarkov, p, dp_dt_boundary, dq_dt_boundary, q) -> tuple[np.ndarray, np.ndarray]:
    """Dp/Dt and Dq/Dt on boundary states (order of ``boundary_indices``)."""
    h = m.hamiltonian
    bi = m.boundary_indices()
    dp = np.zeros(bi.size) if dp_dt_boundary is None else np.asarray(dp_dt_boundary, dtype=float)
    dq = np.zeros(bi.size) if dq_dt_boundary is None else np.asarray(dq_dt_boundary, dtype=float)
    return dp - (h @ p)[bi], dq - (h @ q)[bi]


def f_divergence_rate(
    m: OpenMarkov,
    p: np.ndarray,
    q: np.ndarray,
    f: ConvexFn = KL,
    dp_dt_boundary: np.ndarray | None = None,
    dq_dt_boundary: np.ndarray | None = None,
) -> EntropyReport:
    """Time derivative of ``sum q f(p/q)`` split into internal and boundary parts.

    ``p`` and ``q`` both evolve by the open master equation; the
    ``d*_dt_boundary`` arguments are the total derivatives of the boundary
    probabilities.  The internal part is never positive.
    """
    h = m.hamiltonian
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    x = p / q
    fx, fpx = f(x), f.f_prime(x)
    g = fx - x * fpx
    # sum_ij H_ij q_j (f_i - x_i f'_i) + H_ij p_j f'_i
    internal = float(g @ (h @ q) + fpx @ (h @ p))
    bi = m.boundary_indices()
    dp, dq = _boundary_derivatives(m, p, dp_dt_boundary, dq_dt_boundary, q)
    boundary = float(fpx[bi] @ dp + g[bi] @ dq)
    return EntropyReport(float(np.sum(q * fx)), internal + boundary, internal, boundary)


def f_divergence_rate_direct(
    m: OpenMarkov,
    p: np.ndarray,
    q: np.ndarray,
    f: ConvexFn = KL,
    dp_dt_boundary: np.ndarray | None = None,
    dq_dt_boundary: np.ndarray | None = None,
) -> float:
    """Chain-rule derivative of the f-divergence, with no splitting."""
    h = m.hamiltonian
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dp, dq = h @ p, h @ q
    bi = m.boundary_indices()
    dp[bi] = 0.0 if dp_dt_boundary is None else dp_dt_boundary
    dq[bi] = 0.0 if dq_dt_boundary is None else dq_dt_boundary
    x = p / q
    return float(f.f_prime(x) @ dp + (f(x) - x * f.f_prime(x)) @ dq)


def _require_steady(m: OpenMarkov, q: np.ndarray, tol: float = 1e-9) -> None:
    h = m.hamiltonian
    r = np.abs(h @ q).max(initial=0.0)
    if r > tol * max(1.0, float(np.abs(h).max(initial=0.0)) * float(np.abs(q).max())):
        raise NotSteadyError(f"reference is not an equilibrium, |Hq| = {r:.3e}")


def entropy_rate_equilibrium_decomposition(
    m: OpenMarkov,
    p: np.ndarray,
    q: np.ndarray,
    f: ConvexFn = KL,
    dp_dt_boundary: np.ndarray | None = None,
) -> EntropyReport:
    """Rate of ``I_f(p, q)`` for a fixed equilibrium ``q``, written with flows.

    internal = -1/2 sum_ij J_ij (f'(x_j) - f'(x_i)) and
    boundary = sum_B f'(x_i) Dp_i/Dt.
    """
    _require_steady(m, q)
    h = m.hamiltonian
    p = np.asarray(p, dtype=float)
    x = p / np.asarray(q, dtype=float)
    fp = f.f_prime(x)
    jflow = h * p[None, :] - (h * p[None, :]).T
    np.fill_diagonal(jflow, 0.0)
    internal = float(-0.5 * np.sum(jflow * (fp[None, :] - fp[:, None])))
    bi = m.boundary_indices()
    dp, _ = _boundary_derivatives(m, p, dp_dt_boundary, None, q)
    boundary = float(fp[bi] @ dp)
    return EntropyReport(f_divergence(p, q, f), internal + boundary, internal, boundary)


def _edge_conductances(m: OpenDetailedBalanced) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = np.array([m.states.index(e.source) for e in m.process.edges], dtype=np.intp)
    tgt = np.array([m.states.index(e.target) for e in m.process.edges], dtype=np.intp)
    rate = np.array([e.rate for e in m.process.edges])
    return src, tgt, rate * m.q[src]


def dissipation_pairs(m: OpenDetailedBalanced, p: np.ndarray) -> float:
    """``1/2 sum_ij H_ij q_j (x_j - x_i)^2``."""
    h = m.hamiltonian
    x = np.asarray(p, dtype=float) / m.q
    c = h * m.q[None, :]
    return float(0.5 * np.sum(c * (x[None, :] - x[:, None]) ** 2))


def dissipation_edges(m: OpenDetailedBalanced, p: np.ndarray) -> float:
    """``1/2 sum_e r_e q_s(e) (x_s(e) - x_t(e))^2``."""
    src, tgt, cond = _edge_conductances(m)
    x = np.asarray(p, dtype=float) / m.q
    return float(0.5 * np.sum(cond * (x[src] - x[tgt]) ** 2))


def dissipation(m: OpenDetailedBalanced, p: np.ndarray, tol: float = 1e-12) -> float:
    """Dissipation, computed by both the pair and the edge formula."""
    a, b = dissipation_pairs(m, p), dissipation_edges(m, p)
    if abs(a - b) > tol * max(1.0, abs(a)):
        raise NumericalError(f"pair and edge dissipation disagree: {a!r} vs {b!r}")
    return a


def dissipation_gradient(m: OpenDetailedBalanced, p: np.ndarray) -> np.ndarray:
    """Gradient of the pair-form dissipation with respect to ``p``."""
    h = m.hamiltonian
    x = np.asarray(p, dtype=float) / m.q
    c = h * m.q[None, :]
    np.fill_diagonal(c, 0.0)
    # dD/dx_n = sum_i C_in (x_n - x_i) + sum_j C_nj (x_n - x_j)
    dx = c.sum(axis=0) * x - c.T @ x + c.sum(axis=1) * x - c @ x
    return dx / m.q


def gradient_flow_residual(m: OpenDetailedBalanced, p: np.ndarray) -> float:
    """``|H p + (q/2) grad D(p)|``; zero exactly when detailed balance holds."""
    p = np.asarray(p, dtype=float)
    return float(np.linalg.norm(m.hamiltonian @ p + 0.5 * m.q * dissipation_gradient(m, p)))


def minimum_dissipation_state(m: OpenDetailedBalanced, b) -> np.ndarray:
    """Minimise the dissipation over internal probabilities with boundary fixed.

    Solves the stationarity equations of the quadratic form directly,
    without reference to the master equation: with ``x = p/q`` and
    conductance matrix ``C_ij = H_ij q_j`` symmetrised, the minimiser
    satisfies ``sum_j C_ij (x_i - x_j) = 0`` for every internal ``i``.
    """
    bi, ii = m.boundary_indices(), m.internal_indices()
    bv = _boundary_vector(m, b)
    x = np.zeros(len(m.states))
    x[bi] = bv / m.q[bi]
    c = m.hamiltonian * m.q[None, :]
    np.fill_diagonal(c, 0.0)
    c = 0.5 * (c + c.T)
    lap = np.diag(c.sum(axis=1)) - c
    if ii.size:
        block, rhs = lap[np.ix_(ii, ii)], -lap[np.ix_(ii, bi)] @ x[bi]
        try:
            x[ii] = np.linalg.solve(block, rhs)
        except np.linalg.LinAlgError:
            # components without boundary: any constant x there is optimal
            x[ii] = np.linalg.lstsq(block, rhs, rcond=None)[0]
    return x * m.q


def quadratic_potential(p: np.ndarray, q: np.ndarray) -> float:
    """``1/2 sum p^2 / q``, the f-divergence for ``f(x) = x^2/2``."""
    p = np.asarray(p, dtype=float)
    return float(0.5 * np.sum(p * p / np.asarray(q, dtype=float)))


def dissipation_fdiv_link(m: OpenDetailedBalanced, p: np.ndarray, dp_dt_boundary: np.ndarray | None = None) -> float:
    """Residual of ``d/dt (1/2 sum p^2/q) = -D(p) + sum_B (Dp_i/Dt) x_i``.

    The left side uses the chain rule on the actual derivative of ``p``.
    """
    h = m.hamiltonian
    p = np.asarray(p, dtype=float)
    x = p / m.q
    bi = m.boundary_indices()
    dp = h @ p
    dp_b = np.zeros(bi.size) if dp_dt_boundary is None else np.asarray(dp_dt_boundary, dtype=float)
    big_d = dp_b - dp[bi]
    dp[bi] = dp_b
    lhs = float(x @ dp)
    rhs = -dissipation(m, p) + float(big_d @ x[bi])
    return abs(lhs - rhs)


@dataclass(frozen=True)
class NearEquilibriumReport:
    epsilon: float
    exact_rate: float
    approximation: float
    discrepancy: float
    constant: float  # discrepancy / epsilon**2


def near_equilibrium_expansion_check(
    m: OpenDetailedBalanced, p: np.ndarray, dp_dt_boundary: np.ndarray | None = None
) -> NearEquilibriumReport:
    """Compare the exact relative entropy rate with ``-D(p) + boundary``.

    ``epsilon`` is ``max |x_i - 1|``; for small epsilon the discrepancy is
    bounded by a constant times epsilon squared.
    """
    p = np.asarray(p, dtype=float)
    x = p / m.q
    eps = float(np.abs(x - 1.0).max())
    exact = f_divergence_rate_direct(m, p, m.q, KL, dp_dt_boundary, None)
    bi = m.boundary_indices()
    dp, _ = _boundary_derivatives(m, p, dp_dt_boundary, None, m.q)
    approx = -dissipation(m, p) + float(dp @ np.log(x[bi]))
    disc = abs(exact - approx)
    return NearEquilibriumReport(eps, exact, approx, disc, disc / eps**2 if eps > 0 else 0.0)


def fixed_boundary_rate_gradient(m: OpenMarkov, p: np.ndarray, q: np.ndarray, f: ConvexFn = KL) -> np.ndarray:
    """Gradient over internal states of ``sum_i f'(x_i) (H p)_i`` with the boundary clamped."""
    if f.f_second is None:
        raise ValueError(f"{f.name} has no second derivative")
    h = m.hamiltonian
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ii = m.internal_indices()
    x = p / q
    hp = h @ p
    fp = f.f_prime(x)
    return f.f_second(x[ii]) / q[ii] * hp[ii] + fp[ii] @ h[np.ix_(ii, ii)]


def fixed_boundary_rate_extremum(
    m: OpenMarkov, b, q: np.ndarray, f: ConvexFn = KL, start: np.ndarray | None = None, tol: float = 1e-12
) -> np.ndarray:
    """Internal probabilities at which the clamped-boundary divergence rate is stationary.

    Starts from ``start`` (default: the fixed-boundary steady state) and
    solves the gradient equations with a hybrid Powell root finder.
    """
    from .open_markov import solve_open_master_fixed_boundary

    q = np.asarray(q, dtype=float)
    base = solve_open_master_fixed_boundary(m, b).p if start is None else np.asarray(start, dtype=float).copy()
    ii = m.internal_indices()
    if ii.size == 0:
        return base

    def grad(z):
        p = base.copy()
        p[ii] = np.abs(z)
        return fixed_boundary_rate_gradient(m, p, q, f)

    sol = optimize.root(grad, base[ii], method="hybr", tol=tol)
    if not sol.success or np.abs(grad(sol.x)).max() > 1e-9:
        raise NumericalError(f"no stationary point found: {sol.message}")
    out = base.copy()
    out[ii] = np.abs(sol.x)
    return out
