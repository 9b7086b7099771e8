"""JSON documents (schema ``open-nets/1``) and CSV helpers.

Documents are plain dictionaries with a fixed key order, so that
``dump(parse(text))`` is byte-stable.  Supported kinds: ``markov``,
``reaction``, ``dynam`` and ``relation``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from fractions import Fraction
from typing import Any, Mapping

import jsonschema
import numpy as np

from .finset import Cospan, FinMap, FinSet
from .linrel import LinRel, Subspace
from .markov import Edge, MarkovProcess
from .open_markov import OpenDetailedBalanced, OpenMarkov, q_from_energies
from .open_reaction import OpenDynam, OpenReactionNetwork
from .reaction import PolyVectorField, ReactionNetwork, Transition

SCHEMA_ID = "open-nets/1"

_label_list = {"type": "array", "items": {"type": "string"}}
_label_map = {"type": "object", "additionalProperties": {"type": "string"}}
_real_map = {"type": "object", "additionalProperties": {"type": "number"}}
_count_map = {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}}
_coeff = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}

_common = {
    "schema": {"const": SCHEMA_ID},
    "inputs": _label_map,
    "outputs": _label_map,
    "provenance": {"type": "object"},
}

SCHEMAS: dict[str, dict] = {
    "markov": {
        "type": "object",
        "required": ["schema", "kind", "states", "edges", "inputs", "outputs"],
        "additionalProperties": False,
        "properties": {
            **_common,
            "kind": {"const": "markov"},
            "states": _label_list,
            "edges": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["id", "source", "target", "rate"],
                    "additionalProperties": False,
                    "properties": {
                        "id": {"type": "string"},
                        "source": {"type": "string"},
                        "target": {"type": "string"},
                        "rate": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
            "q": _real_map,
            "energies": _real_map,
        },
    },
    "reaction": {
        "type": "object",
        "required": ["schema", "kind", "species", "transitions", "inputs", "outputs"],
        "additionalProperties": False,
        "properties": {
            **_common,
            "kind": {"const": "reaction"},
            "species": _label_list,
            "transitions": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "input", "output", "rate"],
                    "additionalProperties": False,
                    "properties": {
                        "name": {"type": "string"},
                        "input": _count_map,
                        "output": _count_map,
                        "rate": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
    },
    "dynam": {
        "type": "object",
        "required": ["schema", "kind", "species", "field", "inputs", "outputs"],
        "additionalProperties": False,
        "properties": {
            **_common,
            "kind": {"const": "dynam"},
            "species": _label_list,
            "field": {
                "type": "object",
                "additionalProperties": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["exponents", "coeff"],
                        "additionalProperties": False,
                        "properties": {"exponents": _count_map, "coeff": _coeff},
                    },
                },
            },
        },
    },
    "relation": {
        "type": "object",
        "required": ["schema", "kind", "dom_dim", "cod_dim", "basis"],
        "additionalProperties": False,
        "properties": {
            "schema": {"const": SCHEMA_ID},
            "kind": {"const": "relation"},
            "dom_dim": {"type": "integer", "minimum": 0},
            "cod_dim": {"type": "integer", "minimum": 0},
            "basis": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            "summary": {"type": "string"},
        },
    },
}


class DocumentError(ValueError):
    """A document is not valid JSON, fails the schema, or has dangling labels."""


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: malformed JSON: {exc}") from None
    except OSError as exc:
        raise DocumentError(f"{path}: cannot read: {exc}") from None


def check_schema(doc: Any) -> str:
    """Validate against the schema for the document's kind and return the kind."""
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    kind = doc.get("kind")
    if kind not in SCHEMAS:
        raise DocumentError(f"unknown document kind {kind!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise DocumentError(f"schema violation at {where}: {exc.message}") from None
    return kind


def dumps(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cospan(doc: Mapping, apex: FinSet) -> Cospan:
    try:
        x, y = FinSet(doc["inputs"].keys()), FinSet(doc["outputs"].keys())
        return Cospan(x, apex, y, FinMap(x, apex, doc["inputs"]), FinMap(y, apex, doc["outputs"]))
    except (ValueError, KeyError) as exc:
        raise DocumentError(f"bad cospan legs: {exc}") from None


def _legs(c: Cospan) -> tuple[dict, dict]:
    return c.in_leg.as_dict(), c.out_leg.as_dict()


# -- markov ---------------------------------------------------------------
def markov_from_doc(doc: Mapping) -> OpenMarkov:
    check_schema(doc)
    try:
        states = FinSet(doc["states"])
        proc = MarkovProcess(
            states, [Edge(e["id"], e["source"], e["target"], e["rate"]) for e in doc["edges"]]
        )
    except (ValueError, KeyError) as exc:
        raise DocumentError(str(exc)) from None
    cospan = _cospan(doc, states)
    if "q" in doc and "energies" in doc:
        raise DocumentError("give either q or energies, not both")
    q = None
    if "q" in doc:
        q = _vector(doc["q"], states, "q")
    elif "energies" in doc:
        q = q_from_energies(_vector(doc["energies"], states, "energies"))
    if q is None:
        return OpenMarkov(cospan, proc)
    return OpenDetailedBalanced(cospan, proc, q)


def _vector(values: Mapping[str, float], labels: FinSet, what: str) -> np.ndarray:
    missing = [s for s in labels if s not in values]
    extra = [s for s in values if s not in labels]
    if missing or extra:
        raise DocumentError(f"{what} block: missing {missing}, unknown {extra}")
    return np.array([float(values[s]) for s in labels])


def markov_to_doc(m: OpenMarkov, provenance: Mapping | None = None) -> dict:
    ins, outs = _legs(m.cospan)
    doc: dict[str, Any] = {
        "schema": SCHEMA_ID,
        "kind": "markov",
        "states": list(m.states),
        "edges": [
            {"id": e.id, "source": e.source, "target": e.target, "rate": e.rate} for e in m.process.edges
        ],
        "inputs": ins,
        "outputs": outs,
    }
    if isinstance(m, OpenDetailedBalanced):
        doc["q"] = {s: float(v) for s, v in zip(m.states, m.q)}
    if provenance:
        doc["provenance"] = dict(provenance)
    return doc


# -- reaction -------------------------------------------------------------
def reaction_from_doc(doc: Mapping) -> OpenReactionNetwork:
    check_schema(doc)
    try:
        species = FinSet(doc["species"])
        net = ReactionNetwork(
            species,
            [Transition(t["name"], t["input"], t["output"], t["rate"]) for t in doc["transitions"]],
        )
    except (ValueError, KeyError) as exc:
        raise DocumentError(str(exc)) from None
    return OpenReactionNetwork(_cospan(doc, species), net)


def _complex_dict(species: FinSet, vec) -> dict[str, int]:
    return {s: int(k) for s, k in zip(species, vec) if k}


def reaction_to_doc(r: OpenReactionNetwork, provenance: Mapping | None = None) -> dict:
    ins, outs = _legs(r.cospan)
    sp = r.species
    doc: dict[str, Any] = {
        "schema": SCHEMA_ID,
        "kind": "reaction",
        "species": list(sp),
        "transitions": [
            {
                "name": t.name,
                "input": _complex_dict(sp, t.source),
                "output": _complex_dict(sp, t.target),
                "rate": t.rate if isinstance(t.rate, (int, float)) else float(t.rate),
            }
            for t in r.network.transitions
        ],
        "inputs": ins,
        "outputs": outs,
    }
    if provenance:
        doc["provenance"] = dict(provenance)
    return doc


# -- dynam ----------------------------------------------------------------
def _coeff_out(c: Fraction):
    if c.denominator == 1 and abs(c.numerator) < 2**53:
        return int(c.numerator)
    f = float(c)
    return f if Fraction(f) == c else f"{c.numerator}/{c.denominator}"


def dynam_to_doc(f: OpenDynam, provenance: Mapping | None = None) -> dict:
    ins, outs = _legs(f.cospan)
    sp = f.species
    field = {
        s: [{"exponents": _complex_dict(sp, e), "coeff": _coeff_out(c)} for e, c in f.field.terms(k)]
        for k, s in enumerate(sp)
    }
    doc: dict[str, Any] = {
        "schema": SCHEMA_ID,
        "kind": "dynam",
        "species": list(sp),
        "field": field,
        "inputs": ins,
        "outputs": outs,
    }
    if provenance:
        doc["provenance"] = dict(provenance)
    return doc


def dynam_from_doc(doc: Mapping) -> OpenDynam:
    check_schema(doc)
    try:
        sp = FinSet(doc["species"])
        comps = []
        for s in sp:
            comp: dict = {}
            for term in doc["field"].get(s, []):
                e = [0] * len(sp)
                for name, k in term["exponents"].items():
                    e[sp.index(name)] += int(k)
                comp[tuple(e)] = comp.get(tuple(e), Fraction(0)) + Fraction(term["coeff"])
            comps.append(comp)
        unknown = [s for s in doc["field"] if s not in sp]
        if unknown:
            raise DocumentError(f"field given for unknown species {unknown}")
        field = PolyVectorField(sp, comps)
    except (KeyError, ValueError) as exc:
        raise DocumentError(str(exc)) from None
    return OpenDynam(_cospan(doc, sp), field)


# -- relation -------------------------------------------------------------
def relation_to_doc(rel: LinRel, summary: str | None = None) -> dict:
    doc: dict[str, Any] = {
        "schema": SCHEMA_ID,
        "kind": "relation",
        "dom_dim": rel.dom_dim,
        "cod_dim": rel.cod_dim,
        "basis": [[float(v) for v in col] for col in rel.basis.T],
    }
    if summary:
        doc["summary"] = summary
    return doc


def relation_from_doc(doc: Mapping) -> LinRel:
    check_schema(doc)
    n = doc["dom_dim"] + doc["cod_dim"]
    rows = doc["basis"]
    if any(len(r) != n for r in rows):
        raise DocumentError(f"every basis row must have length {n}")
    mat = np.array(rows, dtype=float).reshape(len(rows), n).T
    if mat.shape[1] and np.abs(mat.T @ mat - np.eye(mat.shape[1])).max() <= 1e-12:
        space = Subspace(n, mat)
    else:
        space = Subspace.from_spanning(mat, n)
    return LinRel(doc["dom_dim"], doc["cod_dim"], space)


def parse(doc: Mapping):
    kind = check_schema(doc)
    return {
        "markov": markov_from_doc,
        "reaction": reaction_from_doc,
        "dynam": dynam_from_doc,
        "relation": relation_from_doc,
    }[kind](doc)


def serialize(obj, provenance: Mapping | None = None) -> dict:
    if isinstance(obj, OpenMarkov):
        return markov_to_doc(obj, provenance)
    if isinstance(obj, OpenReactionNetwork):
        return reaction_to_doc(obj, provenance)
    if isinstance(obj, OpenDynam):
        return dynam_to_doc(obj, provenance)
    if isinstance(obj, LinRel):
        return relation_to_doc(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical(doc: Mapping) -> str:
    """Canonical text of a document: parse it and write it back out."""
    extra = doc.get("provenance") if isinstance(doc, Mapping) else None
    obj = parse(doc)
    out = serialize(obj, extra) if not isinstance(obj, LinRel) else relation_to_doc(obj, doc.get("summary"))
    return dumps(out)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
