"""JSON problem documents.

Schema::

    {"dim": 2, "name": "optional label",
     "objectives": [{"kind": "quadratic", "Q": [[1, 0], [0, 1]], "c": [1, 0], "r": 0.5}, ...],
     "constraint": {"kind": "box", "lower": [0, 0], "upper": [1, 1]}}

Objective kinds and their fields (optional ones in brackets):
``quadratic`` Q [c] [r], ``affine`` a [r], ``l1`` [weight], ``euclidean_norm`` [weight],
``max_affine`` A b, ``least_squares`` A b.
Constraint kinds: ``whole_space``, ``box`` lower upper, ``halfspaces`` A b,
``ball`` center radius. A missing constraint means the whole space.
"""
import json
import re

import numpy as np

from .errors import ConfigError
from .objectives import (
    Affine, Ball, Box, EuclideanNorm, Halfspaces, L1, LeastSquares, MaxAffine, Problem,
    Quadratic, WholeSpace,
)

_TOP = {"dim": True, "objectives": True, "constraint": False, "name": False}

_OBJECTIVES = {
    "quadratic": ({"Q"}, {"c", "r"}),
    "affine": ({"a"}, {"r"}),
    "l1": (set(), {"weight"}),
    "euclidean_norm": (set(), {"weight"}),
    "max_affine": ({"A", "b"}, set()),
    "least_squares": ({"A", "b"}, set()),
}

_CONSTRAINTS = {
    "whole_space": (set(), set()),
    "box": ({"lower", "upper"}, set()),
    "halfspaces": ({"A", "b"}, set()),
    "ball": ({"center", "radius"}, set()),
}


class _Ctx:
    def __init__(self, text):
        self.text = text

    def line_of(self, key):
        if self.text is None:
            return None
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return None if m is None else self.text.count("\n", 0, m.start()) + 1

    def fail(self, msg, key=None):
        line = self.line_of(key) if key is not None else None
        raise ConfigError(f"{msg} (line {line})" if line else msg)


def _keys(ctx, doc, where, required, optional):
    if not isinstance(doc, dict):
        ctx.fail(f"{where} must be a JSON object")
    for k in doc:
        if k not in required and k not in optional and k != "kind":
            ctx.fail(f"unknown key {k!r} in {where}", k)
    for k in sorted(required):
        if k not in doc:
            ctx.fail(f"{where} is missing required key {k!r}")


def _array(ctx, doc, key, where, shape):
    try:
        arr = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError):
        ctx.fail(f"{where}.{key} must be numeric", key)
    if arr.ndim != len(shape):
        ctx.fail(f"{where}.{key} must have {len(shape)} dimension(s), got {arr.ndim}", key)
    for got, want in zip(arr.shape, shape):
        if want is not None and got != want:
            want_s = tuple("*" if w is None else w for w in shape)
            ctx.fail(f"{where}.{key} has shape {arr.shape}, expected {want_s}", key)
    if not np.all(np.isfinite(arr)):
        ctx.fail(f"{where}.{key} contains non-finite values", key)
    return arr


def _scalar(ctx, doc, key, where, default):
    if key not in doc:
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(f"{where}.{key} must be a number", key)
    return float(v)


def _objective(ctx, doc, dim, where):
    if not isinstance(doc, dict) or "kind" not in doc:
        ctx.fail(f"{where} must be an object with a 'kind'")
    kind = doc["kind"]
    if kind not in _OBJECTIVES:
        ctx.fail(f"{where} has unknown kind {kind!r}; expected one of {sorted(_OBJECTIVES)}", "kind")
    _keys(ctx, doc, where, *_OBJECTIVES[kind])
    try:
        if kind == "quadratic":
            Q = _array(ctx, doc, "Q", where, (dim, dim))
            c = _array(ctx, doc, "c", where, (dim,)) if "c" in doc else np.zeros(dim)
            return Quadratic(Q, c, _scalar(ctx, doc, "r", where, 0.0))
        if kind == "affine":
            return Affine(_array(ctx, doc, "a", where, (dim,)), _scalar(ctx, doc, "r", where, 0.0))
        if kind == "l1":
            return L1(dim, _scalar(ctx, doc, "weight", where, 1.0))
        if kind == "euclidean_norm":
            return EuclideanNorm(dim, _scalar(ctx, doc, "weight", where, 1.0))
        A = _array(ctx, doc, "A", where, (None, dim))
        b = _array(ctx, doc, "b", where, (A.shape[0],))
        return MaxAffine(A, b) if kind == "max_affine" else LeastSquares(A, b)
    except ConfigError:
        raise
    except ValueError as exc:
        ctx.fail(f"{where}: {exc}")


def _constraint(ctx, doc, dim):
    where = "constraint"
    if not isinstance(doc, dict) or "kind" not in doc:
        ctx.fail("constraint must be an object with a 'kind'")
    kind = doc["kind"]
    if kind not in _CONSTRAINTS:
        ctx.fail(f"constraint has unknown kind {kind!r}; expected one of {sorted(_CONSTRAINTS)}", "kind")
    _keys(ctx, doc, where, *_CONSTRAINTS[kind])
    try:
        if kind == "whole_space":
            return WholeSpace(dim)
        if kind == "box":
            lo = _array(ctx, doc, "lower", where, (None,))
            hi = _array(ctx, doc, "upper", where, (None,))
            for name, arr in (("lower", lo), ("upper", hi)):
                if arr.size != dim:
                    ctx.fail(f"constraint dimension {arr.size} does not match problem dim {dim}", name)
            return Box(lo, hi)
        if kind == "halfspaces":
            A = _array(ctx, doc, "A", where, (None, None))
            if A.shape[1] != dim:
                ctx.fail(f"constraint dimension {A.shape[1]} does not match problem dim {dim}", "A")
            return Halfspaces(A, _array(ctx, doc, "b", where, (A.shape[0],)))
        center = _array(ctx, doc, "center", where, (None,))
        if center.size != dim:
            ctx.fail(f"constraint dimension {center.size} does not match problem dim {dim}", "center")
        return Ball(center, _scalar(ctx, doc, "radius", where, 0.0))
    except ConfigError:
        raise
    except ValueError as exc:
        ctx.fail(f"constraint: {exc}")


def problem_from_dict(doc, text=None):
    """Validate a parsed document and build the Problem."""
    ctx = _Ctx(text)
    _keys(ctx, doc, "document", {k for k, req in _TOP.items() if req},
          {k for k, req in _TOP.items() if not req})
    dim = doc["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        ctx.fail("dim must be a positive integer", "dim")
    objs = doc["objectives"]
    if not isinstance(objs, list) or not objs:
        ctx.fail("objectives must be a non-empty list", "objectives")
    objectives = [_objective(ctx, o, dim, f"objectives[{i}]") for i, o in enumerate(objs)]
    constraint = _constraint(ctx, doc["constraint"], dim) if "constraint" in doc else WholeSpace(dim)
    name = doc.get("name", "custom")
    if not isinstance(name, str):
        ctx.fail("name must be a string", "name")
    return Problem(tuple(objectives), constraint, name)


def problem_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return problem_from_dict(doc, text)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return problem_from_json(text)


def problem_to_json(problem):
    return json.dumps(problem.to_dict(), indent=2)
