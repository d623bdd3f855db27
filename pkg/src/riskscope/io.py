"""CSV matrices and JSON instance/result files.

Matrices are row-major CSV with '.' decimals, one row per line. Floats are
written with ``repr`` so a save/load round trip is exact.

An instance JSON holds the penalty and noise metadata and either inline
arrays or paths (relative to the JSON file) of CSV files for ``X`` and
``beta_star``.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ArgumentError, ParseError, SchemaError
from .model import (
    Ball, Box, FixedNoise, GaussianNoise, ProblemInstance, ScaledL1, ScaledLqNorm, Singleton,
    SquaredL2, Sum, Zero,
)


# -- CSV -------------------------------------------------------------------------

def parse_csv_matrix(text, *, source="<string>"):
    rows = []
    width = None
    reader = csv.reader(_io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(c.strip() == "" for c in row):
            continue
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell.strip())
            except ValueError:
                raise ParseError(f"{source}: not a number: {cell!r}", lineno, col) from None
            vals.append(v)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ParseError(f"{source}: ragged row with {len(vals)} fields, expected {width}",
                             lineno, min(len(vals), width) + 1)
        rows.append(vals)
    if not rows:
        raise ParseError(f"{source}: empty matrix", 1, 1)
    return np.array(rows, dtype=float)


def load_matrix(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_csv_matrix(text, source=str(path))


def load_vector(path):
    """A vector stored as one column or one row."""
    m = load_matrix(path)
    if m.shape[0] != 1 and m.shape[1] != 1:
        raise ParseError(f"{path}: expected a single row or column, got shape {m.shape}")
    return m.ravel()


def format_csv(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in a)


def save_matrix(path, a):
    Path(path).write_text(format_csv(a))


def save_vector(path, v):
    """One value per line."""
    save_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1))


# -- JSON schemas ----------------------------------------------------------------

def _schema(name):
    return json.loads(resources.files("riskscope").joinpath("schemas").joinpath(name).read_text())


def _best_error(err):
    # descend into the most specific branch of a oneOf failure
    while err.context:
        branches = {}
        for e in err.context:
            branches.setdefault(e.relative_schema_path[0], []).append(e)
        # drop branches rejected only by their type tag
        live = [b for b in branches.values()
                if not any(e.validator in ("const", "enum") for e in b)]
        ctx = [e for b in live for e in b] or list(err.context)
        err = min(ctx, key=lambda e: (-len(e.absolute_path), len(e.message)))
    return err


def validate(doc, schema_name):
    schema = _schema(schema_name)
    v = jsonschema.Draft202012Validator(schema)
    errors = sorted(v.iter_errors(doc), key=lambda e: (len(e.absolute_path), e.message))
    if not errors:
        return
    err = errors[0]
    if err.validator == "required":
        missing = [f for f in err.validator_value if isinstance(err.instance, dict)
                   and f not in err.instance]
        where = "/".join(str(x) for x in err.absolute_path)
        field = missing[0] if missing else "?"
        raise SchemaError(f"missing required field {field!r}" + (f" in {where}" if where else ""))
    err = _best_error(err)
    where = "/".join(str(x) for x in err.absolute_path) or "<root>"
    raise SchemaError(f"invalid field {where!r}: {err.message}")


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_json(text, source=str(path))


def parse_json(text, *, source="<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc.msg}", exc.lineno, exc.colno) from None


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False)


def save_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


# -- penalties and noise -----------------------------------------------------------

def _vec(v, base):
    if isinstance(v, str):
        return tuple(load_vector(_resolve(v, base)))
    if isinstance(v, list):
        return tuple(float(x) for x in v)
    return float(v)


def _resolve(p, base):
    p = Path(p)
    return p if p.is_absolute() or base is None else Path(base) / p


def penalty_from_dict(d, n=None, base=None):
    kind = d["type"]
    if kind == "zero":
        return Zero()
    if kind == "scaled_l1":
        nn = d.get("n", n)
        if nn is None:
            raise SchemaError("scaled_l1 penalty needs 'n' when no design is given")
        return ScaledL1(float(d["lam"]), int(nn))
    if kind == "scaled_lq":
        return ScaledLqNorm(float(d["lam"]), int(d.get("q", 1)), d.get("norm", "l1"))
    if kind == "squared_l2":
        return SquaredL2(float(d["lam"]))
    if kind == "box":
        return Box(_vec(d.get("lo", -math.inf), base), _vec(d.get("hi", math.inf), base))
    if kind == "ball":
        c = d.get("center")
        return Ball(float(d["radius"]), None if c is None else _vec(c, base))
    if kind == "singleton":
        return Singleton(_vec(d.get("point", 0.0), base))
    if kind == "sum":
        return Sum(penalty_from_dict(d["finite"], n, base), penalty_from_dict(d["indicator"], n, base))
    raise SchemaError(f"unknown penalty type {kind!r}")


def _bound_json(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return _plain(v)


def penalty_to_dict(pen):
    if isinstance(pen, Zero):
        return {"type": "zero"}
    if isinstance(pen, ScaledL1):
        return {"type": "scaled_l1", "lam": pen.lam, "n": pen.n}
    if isinstance(pen, ScaledLqNorm):
        return {"type": "scaled_lq", "lam": pen.lam, "q": pen.q, "norm": pen.norm}
    if isinstance(pen, SquaredL2):
        return {"type": "squared_l2", "lam": pen.lam}
    if isinstance(pen, Box):
        return {"type": "box", "lo": _box_bound(pen.lo), "hi": _box_bound(pen.hi)}
    if isinstance(pen, Ball):
        d = {"type": "ball", "radius": pen.radius}
        if pen.center is not None:
            d["center"] = _bound_json(pen.center)
        return d
    if isinstance(pen, Singleton):
        return {"type": "singleton", "point": _bound_json(pen.point)}
    if isinstance(pen, Sum):
        return {"type": "sum", "finite": penalty_to_dict(pen.finite),
                "indicator": penalty_to_dict(pen.indicator)}
    raise ArgumentError(f"cannot serialize penalty {pen!r}")


def _box_bound(v):
    # JSON has no infinities; huge finite sentinels would not round-trip
    if isinstance(v, tuple):
        if not all(math.isfinite(x) for x in v):
            raise ArgumentError("box bounds with infinite entries must be scalars")
        return list(v)
    if math.isinf(v):
        return None
    return v


def noise_from_dict(d, base=None):
    if d["type"] == "fixed":
        return FixedNoise(_vec(d["vector"], base) if not isinstance(d["vector"], (int, float))
                          else (float(d["vector"]),))
    return GaussianNoise(float(d["sigma"]), int(d.get("seed", 0)))


def noise_to_dict(noise):
    if isinstance(noise, FixedNoise):
        return {"type": "fixed", "vector": list(noise.vector)}
    return {"type": "gaussian", "sigma": noise.sigma, "seed": int(noise.seed)}


# -- instances ------------------------------------------------------------------------

def instance_from_dict(doc, base=None):
    doc = _strip_null_bounds(doc)
    validate(doc, "instance.schema.json")
    X = doc["X"]
    X = load_matrix(_resolve(X, base)) if isinstance(X, str) else np.array(X, dtype=float)
    b = doc["beta_star"]
    b = load_vector(_resolve(b, base)) if isinstance(b, str) else np.array(b, dtype=float)
    pen = penalty_from_dict(doc["penalty"], n=X.shape[0], base=base)
    noise = noise_from_dict(doc["noise"], base)
    return ProblemInstance(X, b, noise, pen)


def _strip_null_bounds(doc):
    # null box bounds stand for +-inf
    pen = doc.get("penalty") if isinstance(doc, dict) else None
    if not isinstance(pen, dict):
        return doc

    def fix(p):
        if not isinstance(p, dict):
            return p
        p = dict(p)
        if p.get("type") == "box":
            if p.get("lo", 0) is None:
                p.pop("lo")
            if p.get("hi", 0) is None:
                p.pop("hi")
        if p.get("type") == "sum":
            p["indicator"] = fix(p.get("indicator"))
        return p

    doc = dict(doc)
    doc["penalty"] = fix(pen)
    return doc


def instance_to_dict(inst, *, x_path=None, beta_path=None):
    return {
        "X": x_path if x_path is not None else inst.X.tolist(),
        "beta_star": beta_path if beta_path is not None else inst.beta_star.tolist(),
        "noise": noise_to_dict(inst.noise),
        "penalty": penalty_to_dict(inst.penalty),
    }


def load_instance(path):
    path = Path(path)
    return instance_from_dict(load_json(path), base=path.parent)


def save_instance(path, inst, *, inline=False):
    """Write the JSON metadata; unless ``inline``, X and beta* go to sibling CSV files."""
    path = Path(path)
    if inline:
        save_json(path, instance_to_dict(inst))
        return path
    stem = path.with_suffix("")
    xp = stem.with_name(stem.name + ".X.csv")
    bp = stem.with_name(stem.name + ".beta_star.csv")
    save_matrix(xp, inst.X)
    save_vector(bp, inst.beta_star)
    save_json(path, instance_to_dict(inst, x_path=xp.name, beta_path=bp.name))
    return path
