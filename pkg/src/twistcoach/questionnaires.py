"""Study questionnaire scoring: SUS and the game-experience instrument.

SUS uses the standard 0-100 scoring: odd items contribute (score - 1),
even items contribute (5 - score), the sum scaled by 2.5. The game
experience questionnaire aggregates 1..5 item scores into six
dimensions; the item-to-dimension map ships as a config file because
instruments differ in item numbering across studies.
"""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

import numpy as np

SUS_ITEMS = 10
GEQ_DIMENSIONS = (
    "Competence",
    "Immersion",
    "Flow",
    "PositiveAffect",
    "NegativeAffect",
    "Tension",
)


def sus_score(items: Sequence[int]) -> float:
    """Score a single 10-item SUS response on the 0-100 scale."""
    if len(items) != SUS_ITEMS:
        raise ValueError(f"SUS needs exactly {SUS_ITEMS} items, got {len(items)}")
    total = 0
    for i, score in enumerate(items, 1):
        if not isinstance(score, int) or not 1 <= score <= 5:
            raise ValueError(f"item {i} must be an integer in [1, 5], got {score!r}")
        total += (score - 1) if i % 2 == 1 else (5 - score)
    return total * 2.5


def _sample_sd(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def sus_summary(scores: Iterable[float]) -> dict:
    arr = np.asarray(list(scores), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no SUS scores to summarize")
    return {
        "n": int(arr.size),
        "mean": float(np.mean(arr)),
        "sd": _sample_sd(arr),
        "min": float(np.min(arr)),
        "max": float(np.max(arr)),
    }


def load_sus_csv(path: str) -> list[tuple[str, list[int]]]:
    """Rows of (participant, [Q1..Q10]) from a header-tagged CSV."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [f"Q{i}" for i in range(1, SUS_ITEMS + 1)]
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        missing = [c for c in cols if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing SUS columns {missing}")
        for row in reader:
            participant = row.get("participant") or f"P{len(out) + 1}"
            try:
                items = [int(row[c]) for c in cols]
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: bad row for {participant}: {exc}") from exc
            out.append((participant, items))
    if not out:
        raise ValueError(f"{path}: no responses")
    return out


def load_geq_map(path: str) -> dict[str, str]:
    """Item-to-dimension map, lines of 'Q<n>=<Dimension>'."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected Qn=Dimension")
            item, dim = (part.strip() for part in line.split("=", 1))
            if dim not in GEQ_DIMENSIONS:
                raise ValueError(f"{path}:{lineno}: unknown dimension {dim!r}")
            if item in mapping:
                raise ValueError(f"{path}:{lineno}: item {item} mapped twice")
            mapping[item] = dim
    if not mapping:
        raise ValueError(f"{path}: empty map")
    return mapping


def load_geq_csv(path: str, item_map: dict[str, str]) -> list[tuple[str, dict[str, int]]]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        missing = [item for item in item_map if item not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing item columns {sorted(missing)}")
        for row in reader:
            participant = row.get("participant") or f"P{len(out) + 1}"
            try:
                items = {item: int(row[item]) for item in item_map}
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: bad row for {participant}: {exc}") from exc
            out.append((participant, items))
    if not out:
        raise ValueError(f"{path}: no responses")
    return out


def geq_summary(
    responses: list[dict[str, int]], item_map: dict[str, str]
) -> tuple[dict[str, dict], dict[str, dict]]:
    """Per-dimension and per-item means and sample SDs.

    A participant's dimension score is the mean of that dimension's
    items; dimension statistics are taken across participants.
    """
    if not responses:
        raise ValueError("no responses")
    for i, resp in enumerate(responses, 1):
        for item, score in resp.items():
            if item not in item_map:
                raise ValueError(f"response {i}: unmapped item {item!r}")
            if not isinstance(score, int) or not 1 <= score <= 5:
                raise ValueError(f"response {i}: item {item} out of range: {score!r}")

    dims: dict[str, list[float]] = {d: [] for d in GEQ_DIMENSIONS}
    for resp in responses:
        per_dim: dict[str, list[int]] = {}
        for item, score in resp.items():
            per_dim.setdefault(item_map[item], []).append(score)
        for dim, scores in per_dim.items():
            dims[dim].append(float(np.mean(scores)))

    by_dimension = {}
    for dim in GEQ_DIMENSIONS:
        values = np.asarray(dims[dim], dtype=np.float64)
        if values.size == 0:
            continue
        by_dimension[dim] = {"mean": float(np.mean(values)), "sd": _sample_sd(values)}

    by_item = {}
    for item in sorted(item_map, key=lambda s: (len(s), s)):
        values = np.asarray([r[item] for r in responses if item in r], dtype=np.float64)
        if values.size:
            by_item[item] = {"mean": float(np.mean(values)), "sd": _sample_sd(values)}
    return by_dimension, by_item
