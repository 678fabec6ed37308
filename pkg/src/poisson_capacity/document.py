"""Solution documents: JSON with exact float round-trip."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

from .channel import ChannelParams, DomainError
from .info import DiscreteInput
from .solver import CapacitySolution, SolverConfig

SCHEMA_VERSION = "1"
_REQUIRED = ("schema_version", "amplitude", "dark_current", "capacity_nats", "kkt_gap", "y_max", "points")


class MalformedDocument(ValueError):
    """Unreadable document or missing/mistyped fields."""


class InvariantViolation(ValueError):
    """Document parses but describes an invalid input law."""


def solution_document(solution: CapacitySolution, params: ChannelParams, config: SolverConfig) -> dict:
    # runtime is left out so identical runs give identical bytes
    return {
        "schema_version": SCHEMA_VERSION,
        "amplitude": params.amplitude,
        "dark_current": params.dark_current,
        "capacity_nats": solution.capacity_nats,
        "capacity_bits": solution.capacity_bits,
        "kkt_gap": solution.kkt_gap,
        "support_gap": solution.support_gap,
        "converged": solution.converged,
        "iterations": solution.iterations,
        "y_max": solution.y_max,
        "points": [{"x": float(x), "p": float(p)} for x, p in zip(solution.input.points, solution.input.probs)],
        "config": dataclasses.asdict(config),
    }


def dumps(doc: dict) -> str:
    # json writes floats with repr: shortest string that round-trips exactly
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


def write_solution(path, solution, params, config) -> dict:
    doc = solution_document(solution, params, config)
    Path(path).write_text(dumps(doc))
    return doc


def read_document(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocument(f"cannot read solution document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("solution document must be a JSON object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise MalformedDocument(f"missing fields: {', '.join(missing)}")
    if str(doc["schema_version"]) != SCHEMA_VERSION:
        raise MalformedDocument(f"unsupported schema_version {doc['schema_version']!r}")
    pts = doc["points"]
    if not isinstance(pts, list) or not pts or not all(isinstance(e, dict) and {"x", "p"} <= e.keys() for e in pts):
        raise MalformedDocument("points must be a nonempty list of {x, p} objects")
    try:
        for key in ("amplitude", "dark_current", "capacity_nats", "kkt_gap"):
            doc[key] = float(doc[key])
        doc["y_max"] = int(doc["y_max"])
        doc["points"] = [{"x": float(e["x"]), "p": float(e["p"])} for e in pts]
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad numeric field: {exc}") from exc
    return doc


def load_solution(path):
    """Parse a document into ``(params, input, config, doc)``.

    Raises :class:`MalformedDocument` for structural problems and
    :class:`InvariantViolation` when the described law is not a valid input.
    """
    doc = read_document(path)
    try:
        params = ChannelParams(doc["amplitude"], doc["dark_current"])
    except DomainError as exc:
        raise InvariantViolation(str(exc)) from exc
    try:
        config = SolverConfig.from_mapping(doc.get("config") or {})
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad config block: {exc}") from exc
    try:
        inp = DiscreteInput([e["x"] for e in doc["points"]], [e["p"] for e in doc["points"]]).validate(params)
    except DomainError as exc:
        raise InvariantViolation(str(exc)) from exc
    if not math.isfinite(doc["capacity_nats"]):
        raise InvariantViolation("capacity_nats is not finite")
    return params, inp, config, doc


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedDocument(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values
