"""Artifact formats: JSON documents, policy files, heatmap and frontier CSVs.

Floats are written with 17 significant digits so that reruns with the same
configuration produce byte-identical files; infinities are written as the
string ``"inf"``.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .dp_core import Policy

INF_SENTINEL = "inf"


def fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return INF_SENTINEL if x > 0 else "-" + INF_SENTINEL
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt(obj)
        return json.dumps(s) if s in ("inf", "-inf", "nan") else s
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def _as_float(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    return v


def read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def policy_to_dict(policy: Policy) -> dict:
    d = {
        "times": policy.times,
        "wealth": policy.wealth,
        "u": policy.u,
        "meta": policy.meta,
    }
    if policy.threshold is not None:
        d["threshold"] = policy.threshold
    if policy.unbounded is not None:
        d["unbounded"] = policy.unbounded.astype(int)
    return d


def policy_from_dict(d: dict) -> Policy:
    for key in ("times", "wealth", "u"):
        if key not in d:
            raise ValueError(f"policy file lacks {key!r}")
    threshold = d.get("threshold")
    if threshold is not None:
        threshold = np.array([[float(_as_float(v)) for v in row] for row in threshold])
    unbounded = d.get("unbounded")
    if unbounded is not None:
        unbounded = np.asarray(unbounded, dtype=bool)
    return Policy(np.asarray(d["times"], dtype=float), np.asarray(d["wealth"], dtype=float),
                  np.asarray(d["u"], dtype=float), threshold, unbounded, dict(d.get("meta", {})))


def write_policy(path: str, policy: Policy, extra_meta: Optional[dict] = None) -> None:
    d = policy_to_dict(policy)
    if extra_meta:
        d["meta"] = {**d["meta"], **extra_meta}
    write_json(path, d)


def read_policy(path: str) -> Policy:
    return policy_from_dict(read_json(path))


def heatmap_text(times: Sequence[float], wealth: Sequence[float], table) -> str:
    """First row: rebalance times; first column: wealth nodes; cells table[m, p]."""
    table = np.asarray(table, dtype=float)
    if table.shape != (len(times), len(wealth)):
        raise ValueError("heatmap table must have shape (n_times, n_wealth)")
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["wealth"] + [fmt(t) for t in times])
    for p, w in enumerate(wealth):
        writer.writerow([fmt(w)] + [fmt(v) for v in table[:, p]])
    return buf.getvalue()


def write_heatmap(path: str, times, wealth, table) -> None:
    with open(path, "w") as fh:
        fh.write(heatmap_text(times, wealth, table))


def read_heatmap(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    times = np.array([float(v) for v in rows[0][1:]])
    wealth = np.array([float(r[0]) for r in rows[1:]])
    cells = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).T
    return times, wealth, cells


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_frontier(path: str, points) -> None:
    write_rows(path, ["gamma", "risk", "expectation", "threshold", "solver"],
               ([p.gamma, p.risk, p.expectation, p.threshold, p.solver] for p in points))


def write_histogram(path: str, centers, densities) -> None:
    write_rows(path, ["bin_center", "density"],
               ([float(c), float(d)] for c, d in zip(centers, densities)))
