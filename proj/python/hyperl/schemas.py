"""CSV schemas written by the harness and read by figure tooling.

Each loader checks the header against the schema, rejects unknown or missing
columns, empty files and malformed rows, and returns a dict of column lists.
"""

import csv
import math
import re
from collections import defaultdict

RUNLOG_COLUMNS = (
    "phase", "seed", "episode", "mu", "cum_reward", "state_cost", "action_cost", "steps", "wall_ms", "blowup",
)
STATS_COLUMNS = ("phase", "window", "episodes", "seeds", "mean", "std", "ci_low", "ci_high")
NS_FIELD_COLUMNS = ("i", "j", "x", "y", "u", "v", "u_ref", "v_ref")

_STRING_COLUMNS = {"phase", "window"}
_INT_COLUMNS = {"seed", "episode", "steps", "blowup", "episodes", "seeds", "t_index", "controlled", "i", "j"}
_OPTIONAL_COLUMNS = {"ci_low", "ci_high"}


class SchemaError(ValueError):
    pass


def trajectory_columns(state_dim, action_dim):
    return (
        ("t_index", "mu", "controlled")
        + tuple(f"y_{k}" for k in range(state_dim))
        + tuple(f"a_{k}" for k in range(action_dim))
        + ("reward", "state_cost", "action_cost")
    )


def _trajectory_dims(header):
    ys = [c for c in header if re.fullmatch(r"y_\d+", c)]
    acts = [c for c in header if re.fullmatch(r"a_\d+", c)]
    return len(ys), len(acts)


def expected_columns(kind, header=()):
    if kind == "runlog":
        return RUNLOG_COLUMNS
    if kind == "stats":
        return STATS_COLUMNS
    if kind == "ns_field":
        return NS_FIELD_COLUMNS
    if kind == "trajectory":
        return trajectory_columns(*_trajectory_dims(header))
    raise SchemaError(f"unknown schema kind {kind!r}")


def _convert(column, text, line):
    if column in _STRING_COLUMNS:
        return text
    if column in _OPTIONAL_COLUMNS and text == "":
        return None
    try:
        if column in _INT_COLUMNS:
            return int(text)
        value = float(text)
    except ValueError:
        raise SchemaError(f"line {line}: column {column!r} holds non-numeric {text!r}") from None
    return value


def load_csv(path, kind):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = tuple(rows[0])
    expected = expected_columns(kind, header)
    unknown = [c for c in header if c not in expected]
    if unknown:
        raise SchemaError(f"{path}: unknown columns {unknown}")
    if header != expected:
        missing = [c for c in expected if c not in header]
        raise SchemaError(f"{path}: header does not match the {kind} schema (missing {missing})")
    if len(rows) == 1:
        raise SchemaError(f"{path}: no data rows")
    table = {c: [] for c in header}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: line {n} has {len(row)} fields, expected {len(header)}")
        for c, text in zip(header, row):
            table[c].append(_convert(c, text, n))
    return table


def episode_bands(runlog, phase="train"):
    """Per-episode mean and population std of cum_reward across seeds.

    Returns (episodes, means, stds) sorted by episode.
    """
    groups = defaultdict(list)
    for ph, ep, r in zip(runlog["phase"], runlog["episode"], runlog["cum_reward"]):
        if ph == phase:
            groups[ep].append(r)
    if not groups:
        raise SchemaError(f"no {phase} rows")
    episodes = sorted(groups)
    means, stds = [], []
    for ep in episodes:
        v = groups[ep]
        m = sum(v) / len(v)
        means.append(m)
        stds.append(math.sqrt(sum((x - m) ** 2 for x in v) / len(v)))
    return episodes, means, stds
