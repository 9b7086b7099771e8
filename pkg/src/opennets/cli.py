"""Command line front end.

Exit codes: 0 success (including "unknown" verdicts), 2 invalid input,
3 composition mismatch, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from . import io as nio
from .behavior_markov import blackbox_markov, naturality_sides
from .behavior_rx import BehaviorOracle, BoundaryTuple, SolverSettings, check_functoriality_rx
from .errors import DetailedBalanceError, InterfaceMismatchError, NumericalError, OpenNetsError
from .finset import glue
from .linrel import compose_rel, equal_rel
from .markov import check_kolmogorov, is_infinitesimal_stochastic, matrix_tree_steady_state
from .open_markov import (
    OpenDetailedBalanced,
    OpenMarkov,
    compose_open,
    compose_open_db,
    open_master_step,
    solve_open_master_fixed_boundary,
    tensor_open,
)
from .open_reaction import (
    OpenDynam,
    OpenReactionNetwork,
    compose_dynam,
    compose_open_rx,
    graybox,
    open_rate_step,
    tensor_dynam,
    tensor_open_rx,
)
from .thermo import KL, f_divergence_rate, relative_entropy

EXIT_OK, EXIT_INVALID, EXIT_MISMATCH, EXIT_NUMERIC = 0, 2, 3, 4
CONFIG_ENV = "OPENNETS_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    residual_tol: float = 1e-10
    rank_tol: float = 1e-9
    equality_tol: float = 1e-8
    dt: float = 0.01
    t: float = 1.0
    starts: int = 32
    max_iter: int = 100
    box_low: float = 0.0
    box_high: float = 10.0
    samples: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("residual_tol", "rank_tol", "equality_tol", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t < 0 or self.starts < 1 or self.max_iter < 1 or self.samples < 0:
            raise ValueError("t, starts, max_iter and samples must be nonnegative (starts, max_iter >= 1)")

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        data = nio.load_json(path)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise nio.DocumentError(f"unknown config keys {unknown}")
        return cls(**data)

    def solver(self) -> SolverSettings:
        return SolverSettings(
            starts=self.starts,
            box=(self.box_low, self.box_high),
            max_iter=self.max_iter,
            residual_tol=self.residual_tol,
            rank_tol=self.rank_tol,
        )


class UsageError(Exception):
    pass


def _config(args) -> RunConfig:
    path = args.config
    if path is None and os.environ.get(CONFIG_ENV):
        path = os.environ[CONFIG_ENV]
        print(f"note: using config file {path} from ${CONFIG_ENV}", file=sys.stderr)
    cfg = RunConfig.load(path) if path else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.tol is not None:
        cfg = replace(cfg, equality_tol=args.tol)
    return cfg


def _emit(args, text: str) -> None:
    if args.out:
        nio.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _load(path: str):
    return nio.parse(nio.load_json(path))


def _json_arg(value: str) -> dict:
    """Inline JSON or a path to a JSON file."""
    if os.path.exists(value):
        return nio.load_json(value)
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise nio.DocumentError(f"argument is neither a file nor JSON: {exc}") from None


# -- validate -------------------------------------------------------------
def cmd_validate(args, cfg: RunConfig) -> int:
    report: dict = {"file": args.file, "valid": False, "checks": {}}
    try:
        doc = nio.load_json(args.file)
        kind = nio.check_schema(doc)
        report["kind"] = kind
        report["checks"]["schema"] = True
        if kind == "markov" and ("q" in doc or "energies" in doc):
            plain = {k: v for k, v in doc.items() if k not in ("q", "energies")}
            m = nio.parse(plain)
            report["checks"]["column_sums"] = is_infinitesimal_stochastic(m.hamiltonian)
            report["checks"]["kolmogorov"] = check_kolmogorov(m.process)
            try:
                nio.parse(doc)
                report["checks"]["detailed_balance"] = True
            except DetailedBalanceError as exc:
                report["checks"]["detailed_balance"] = False
                raise nio.DocumentError(str(exc)) from None
        else:
            obj = nio.parse(doc)
            if isinstance(obj, OpenMarkov):
                report["checks"]["column_sums"] = is_infinitesimal_stochastic(obj.hamiltonian)
                report["checks"]["kolmogorov"] = check_kolmogorov(obj.process)
        report["valid"] = True
    except (nio.DocumentError, ValueError) as exc:
        report["error"] = str(exc)
        _emit(args, nio.dumps(report))
        return EXIT_INVALID
    _emit(args, nio.dumps(report))
    return EXIT_OK


# -- compose / tensor -----------------------------------------------------
def _kinds_match(a, b) -> None:
    ka, kb = type(a).__name__, type(b).__name__
    same = (
        (isinstance(a, OpenMarkov) and isinstance(b, OpenMarkov))
        or (isinstance(a, OpenReactionNetwork) and isinstance(b, OpenReactionNetwork))
        or (isinstance(a, OpenDynam) and isinstance(b, OpenDynam))
    )
    if not same:
        raise InterfaceMismatchError(f"cannot combine {ka} with {kb}")


def cmd_compose(args, cfg: RunConfig) -> int:
    a, b = _load(args.file1), _load(args.file2)
    _kinds_match(a, b)
    _, po = glue(a.cospan, b.cospan)
    if isinstance(a, OpenDetailedBalanced) and isinstance(b, OpenDetailedBalanced):
        out = compose_open_db(a, b)
    elif isinstance(a, OpenMarkov):
        out = compose_open(a, b)
    elif isinstance(a, OpenReactionNetwork):
        out = compose_open_rx(a, b)
    else:
        out = compose_dynam(a, b)
    provenance = {
        "operation": "compose",
        "sources": [args.file1, args.file2],
        "gluing": {"left": po.quot_left.as_dict(), "right": po.quot_right.as_dict()},
    }
    _emit(args, nio.dumps(nio.serialize(out, provenance)))
    return EXIT_OK


def cmd_tensor(args, cfg: RunConfig) -> int:
    a, b = _load(args.file1), _load(args.file2)
    _kinds_match(a, b)
    if isinstance(a, OpenMarkov):
        out = tensor_open(a, b)
    elif isinstance(a, OpenReactionNetwork):
        out = tensor_open_rx(a, b)
    else:
        out = tensor_dynam(a, b)
    _emit(args, nio.dumps(nio.serialize(out, {"operation": "tensor", "sources": [args.file1, args.file2]})))
    return EXIT_OK


# -- black boxes ----------------------------------------------------------
def _as_dynam(obj) -> OpenDynam:
    if isinstance(obj, OpenReactionNetwork):
        return graybox(obj)
    if isinstance(obj, OpenDynam):
        return obj
    raise nio.DocumentError("expected a reaction or dynam document")


def _tuple_rows(ts: Sequence[BoundaryTuple]) -> list[list[float]]:
    return [t.as_vector().tolist() for t in ts]


def _tuple_header(f: OpenDynam) -> list[str]:
    cs = f.cospan
    return (
        [f"c[{x}]" for x in cs.left]
        + [f"I[{x}]" for x in cs.left]
        + [f"c[{y}]" for y in cs.right]
        + [f"O[{y}]" for y in cs.right]
    )


def cmd_blackbox(args, cfg: RunConfig) -> int:
    obj = _load(args.file)
    if isinstance(obj, OpenMarkov):
        rel = blackbox_markov(obj, cfg.rank_tol)
        summary = (
            f"behavior of dimension {rel.dim} in R^{rel.dom_dim} x R^{rel.cod_dim} "
            f"({len(obj.cospan.left)} inputs, {len(obj.cospan.right)} outputs)"
        )
        print(summary, file=sys.stderr)
        _emit(args, nio.dumps(nio.relation_to_doc(rel, summary)))
        return EXIT_OK
    f = _as_dynam(obj)
    oracle = BehaviorOracle(f, cfg.solver(), cfg.seed)
    samples = oracle.sample(cfg.samples, cfg.seed)
    verdicts = [oracle.membership(t).verdict for t in samples]
    report = {
        "kind": "reaction-behavior",
        "requested": cfg.samples,
        "sampled": len(samples),
        "membership": {v: verdicts.count(v) for v in ("yes", "no", "unknown")},
        "columns": _tuple_header(f),
        "samples": _tuple_rows(samples),
    }
    _emit(args, nio.dumps(report))
    return EXIT_OK


def cmd_blackbox_rx(args, cfg: RunConfig) -> int:
    f = _as_dynam(_load(args.file))
    oracle = BehaviorOracle(f, cfg.solver(), cfg.seed)
    if args.query:
        q = _json_arg(args.query)
        try:
            t = BoundaryTuple(
                np.asarray(q["in_conc"], float), np.asarray(q["inflow"], float),
                np.asarray(q["out_conc"], float), np.asarray(q["outflow"], float),
            )
        except KeyError as exc:
            raise nio.DocumentError(f"query is missing {exc}") from None
        res = oracle.membership(t)
        out = {
            "verdict": res.verdict,
            "residual": res.residual,
            "unphysical": res.unphysical,
            "reason": res.reason,
            "witness": None if res.witness is None else dict(zip(f.species, res.witness.tolist())),
        }
        _emit(args, nio.dumps(out))
    elif args.functoriality:
        g = _as_dynam(_load(args.functoriality))
        report = check_functoriality_rx(f, g, cfg.samples, cfg.seed, cfg.equality_tol, cfg.solver())
        _emit(args, nio.dumps(report))
    else:
        samples = oracle.sample(cfg.samples, cfg.seed)
        _emit(args, nio.csv_text(_tuple_header(f), _tuple_rows(samples)))
    return EXIT_OK


# -- simulation -----------------------------------------------------------
def _schedule(args, cfg: RunConfig) -> dict:
    sched = _json_arg(args.schedule) if args.schedule else {}
    if "segments" not in sched:
        sched = dict(sched, segments=[{"duration": cfg.t}])
    return sched


def _vec(values: dict | None, labels, default: float = 0.0) -> np.ndarray:
    values = values or {}
    unknown = [k for k in values if k not in labels]
    if unknown:
        raise nio.DocumentError(f"unknown labels {unknown}")
    return np.array([float(values.get(x, default)) for x in labels])


def _trajectory(obj, sched: dict, cfg: RunConfig):
    """Yield (time, state, inflow, outflow) at every step boundary."""
    labels = obj.cospan.apex
    if "initial" not in sched:
        raise nio.DocumentError("schedule needs an 'initial' block")
    x = _vec(sched["initial"], labels)
    t = 0.0
    yield t, x, None, None
    for seg in sched["segments"]:
        dur = float(seg.get("duration", 0.0))
        if dur < 0:
            raise nio.DocumentError("segment duration must be nonnegative")
        inflow = _vec(seg.get("inflows"), obj.cospan.left)
        outflow = _vec(seg.get("outflows"), obj.cospan.right)
        n = math.ceil(dur / cfg.dt - 1e-12) if dur > 0 else 0
        for _ in range(n):
            h = dur / n
            if isinstance(obj, OpenMarkov):
                x = open_master_step(obj, x, inflow, outflow, h)
            else:
                x = open_rate_step(obj, x, inflow, outflow, h)
            t += h
            yield t, x, inflow, outflow


def _entropy_columns(m: OpenDetailedBalanced, p: np.ndarray, inflow, outflow) -> list[float]:
    if inflow is None:
        inflow, outflow = np.zeros(len(m.cospan.left)), np.zeros(len(m.cospan.right))
    drive = m.cospan.in_leg.matrix() @ inflow - m.cospan.out_leg.matrix() @ outflow
    bi = m.boundary_indices()
    dp_b = (m.hamiltonian @ p + drive)[bi]
    # the rate is singular where some p_i = 0; report nan there
    with np.errstate(divide="ignore", invalid="ignore"):
        rep = f_divergence_rate(m, p, m.q, KL, dp_b, None)
    return [relative_entropy(p, m.q), rep.rate, rep.internal_term, rep.boundary_term]


def _simulation_object(path: str):
    obj = _load(path)
    if isinstance(obj, OpenReactionNetwork):
        return graybox(obj)
    if isinstance(obj, (OpenMarkov, OpenDynam)):
        return obj
    raise nio.DocumentError("simulate needs a markov, reaction or dynam document")


def cmd_simulate(args, cfg: RunConfig) -> int:
    obj = _simulation_object(args.file)
    sched = _schedule(args, cfg)
    with_entropy = isinstance(obj, OpenDetailedBalanced)
    header = ["t"] + list(obj.cospan.apex)
    if with_entropy:
        header += ["relative_entropy", "rate", "internal", "boundary"]
    total = sum(float(s.get("duration", 0.0)) for s in sched["segments"])
    rows = []
    if total > 0:
        for t, x, i_, o_ in _trajectory(obj, sched, cfg):
            row = [t] + x.tolist()
            if with_entropy:
                row += _entropy_columns(obj, x, i_, o_)
            rows.append(row)
    _emit(args, nio.csv_text(header, rows))
    return EXIT_OK


def cmd_entropy_report(args, cfg: RunConfig) -> int:
    obj = _load(args.file)
    if not isinstance(obj, OpenDetailedBalanced):
        raise nio.DocumentError("entropy-report needs a markov document with a q or energies block")
    sched = _schedule(args, cfg)
    out = []
    for t, x, i_, o_ in _trajectory(obj, sched, cfg):
        value, rate, internal, boundary = _entropy_columns(obj, x, i_, o_)
        row = {"t": t, "value": value, "rate": rate, "internal": internal, "boundary": boundary}
        out.append({k: (v if math.isfinite(v) else None) for k, v in row.items()})
    _emit(args, nio.dumps({"kind": "entropy-report", "divergence": KL.name, "steps": out}))
    return EXIT_OK


def cmd_steady_state(args, cfg: RunConfig) -> int:
    obj = _load(args.file)
    if not isinstance(obj, OpenMarkov):
        raise nio.DocumentError("steady-state needs a markov document")
    b = _json_arg(args.boundary) if args.boundary else {}
    sol = solve_open_master_fixed_boundary(obj, b, cfg.rank_tol)
    if sol.degenerate:
        print(
            f"note: internal block is singular; returning one point of a {sol.kernel.shape[1]}-dimensional family",
            file=sys.stderr,
        )
    rows = [[s, float(v)] for s, v in zip(obj.states, sol.p)]
    _emit(args, nio.csv_text(["state", "p"], rows))
    return EXIT_OK


def cmd_tree_steady_state(args, cfg: RunConfig) -> int:
    obj = _load(args.file)
    if not isinstance(obj, OpenMarkov):
        raise nio.DocumentError("tree-steady-state needs a markov document")
    q, z = matrix_tree_steady_state(obj.process, normalize=False)
    rows = [[s, float(w), float(w / z)] for s, w in zip(obj.states, q)]
    rows.append(["Z", float(z), 1.0])
    _emit(args, nio.csv_text(["state", "tree_weight", "probability"], rows))
    return EXIT_OK


# -- laws -----------------------------------------------------------------
def _field_diff(a: OpenDynam, b: OpenDynam) -> list[dict]:
    diffs = []
    if list(a.species) != list(b.species):
        return [{"where": "species", "left": list(a.species), "right": list(b.species)}]
    if a.cospan.in_leg.as_dict() != b.cospan.in_leg.as_dict() or a.cospan.out_leg.as_dict() != b.cospan.out_leg.as_dict():
        diffs.append({"where": "legs"})
    for k, s in enumerate(a.species):
        ca, cb = a.field.components[k], b.field.components[k]
        for e in sorted(set(ca) | set(cb)):
            if ca.get(e) != cb.get(e):
                mono = {sp: p for sp, p in zip(a.species, e) if p}
                diffs.append({
                    "species": s,
                    "monomial": mono,
                    "left": None if e not in ca else str(ca[e]),
                    "right": None if e not in cb else str(cb[e]),
                })
    return diffs


def cmd_check(args, cfg: RunConfig) -> int:
    law = args.law
    verdict: dict = {"law": law}
    if law == "naturality":
        m = _load(args.file)
        if not isinstance(m, OpenDetailedBalanced):
            raise nio.DocumentError("naturality needs a markov document with q")
        lhs, rhs = naturality_sides(m, cfg.rank_tol)
        verdict.update(passed=equal_rel(lhs, rhs, cfg.equality_tol), dimension=lhs.dim)
    elif law == "functoriality-markov":
        a, b = _load(args.file), _load(_need_second(args))
        if not (isinstance(a, OpenMarkov) and isinstance(b, OpenMarkov)):
            raise InterfaceMismatchError("functoriality-markov needs two markov documents")
        whole = blackbox_markov(compose_open(a, b), cfg.rank_tol)
        parts = compose_rel(blackbox_markov(a, cfg.rank_tol), blackbox_markov(b, cfg.rank_tol), cfg.rank_tol)
        verdict.update(passed=equal_rel(whole, parts, cfg.equality_tol), dimensions=[whole.dim, parts.dim])
    elif law == "functoriality-rx":
        a, b = _as_dynam(_load(args.file)), _as_dynam(_load(_need_second(args)))
        report = check_functoriality_rx(a, b, cfg.samples, cfg.seed, cfg.equality_tol, cfg.solver())
        verdict.update(passed=report["failed"] == 0, report=report)
    elif law == "graybox":
        a, b = _load(args.file), _load(_need_second(args))
        if not (isinstance(a, OpenReactionNetwork) and isinstance(b, OpenReactionNetwork)):
            raise InterfaceMismatchError("graybox needs two reaction documents")
        whole = graybox(compose_open_rx(a, b))
        if args.expected:
            claimed = _as_dynam(_load(args.expected))
            diffs = _field_diff(claimed, whole)
            verdict.update(compared="expected document vs gray box of the composite")
        else:
            parts = compose_dynam(graybox(a), graybox(b))
            diffs = _field_diff(whole, parts)
        verdict.update(passed=not diffs, discrepancies=diffs)
    else:
        raise UsageError(f"unknown law {law!r}")
    _emit(args, nio.dumps(verdict))
    return EXIT_OK


def _need_second(args) -> str:
    if not args.file2:
        raise UsageError(f"law {args.law} needs two files")
    return args.file2


# -- entry point ----------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (tolerances, integrator, solver, seed)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="write output here (atomically) instead of stdout")
    common.add_argument("--tol", type=float, help="override the equality tolerance")

    p = argparse.ArgumentParser(prog="opennets", description="Compose and analyse open Markov processes and reaction networks.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="schema and invariant checks")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    for name, func, helptext in (("compose", cmd_compose, "glue outputs of FILE1 to inputs of FILE2"),
                                 ("tensor", cmd_tensor, "disjoint union of two open systems")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("file1")
        s.add_argument("file2")
        s.set_defaults(func=func)

    s = sub.add_parser("blackbox", parents=[common], help="steady-state behavior (relation or sampled report)")
    s.add_argument("file")
    s.set_defaults(func=cmd_blackbox)

    s = sub.add_parser("blackbox-rx", parents=[common], help="membership, sampling or functoriality for reaction behaviors")
    s.add_argument("file")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--query", help="JSON tuple {in_conc, inflow, out_conc, outflow} (inline or file)")
    g.add_argument("--functoriality", metavar="FILE2", help="check against the composite with FILE2")
    s.set_defaults(func=cmd_blackbox_rx)

    for name, func, helptext in (("simulate", cmd_simulate, "CSV trajectory under a piecewise-constant schedule"),
                                 ("entropy-report", cmd_entropy_report, "relative entropy and its rate per step")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("file")
        s.add_argument("--schedule", help="JSON {initial, segments:[{duration, inflows, outflows}]}")
        s.set_defaults(func=func)

    s = sub.add_parser("steady-state", parents=[common], help="fixed-boundary steady state")
    s.add_argument("file")
    s.add_argument("--boundary", help="JSON {state: probability} for boundary states")
    s.set_defaults(func=cmd_steady_state)

    s = sub.add_parser("tree-steady-state", parents=[common], help="steady state from spanning trees")
    s.add_argument("file")
    s.set_defaults(func=cmd_tree_steady_state)

    s = sub.add_parser("check", parents=[common], help="check a composition law")
    s.add_argument("law", choices=["functoriality-markov", "functoriality-rx", "naturality", "graybox"])
    s.add_argument("file")
    s.add_argument("file2", nargs="?")
    s.add_argument("--expected", help="claimed composite (graybox law) to compare against")
    s.set_defaults(func=cmd_check)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except InterfaceMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        print("advice: reduce dt (see --config) or check rates for stiffness", file=sys.stderr)
        return EXIT_NUMERIC
    except (nio.DocumentError, UsageError, OpenNetsError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
