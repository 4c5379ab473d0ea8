"""
Scene matching over a manifest::

    {"scenes": [{"scene_id": "0001",
                 "scores": {"s_t": [[...]], "s_d": [[...]], "s_i": [[...]]},
                 "candidates": [{"box": [x1, y1, x2, y2], "score": 0.9}, ...]}]}

``scores`` are ``M x N`` (subjects by candidate boxes). ``candidates`` is optional; when present
the boxes are filtered first (area band and dedup) and only surviving columns take part in the
assignment. A scene left with fewer boxes than subjects is rejected as ``TooFewSubjects``.
"""

import json
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..errors import DataError, MalformedManifest
from ..pipeline import (
    AcceptThresholds,
    Assignment,
    Candidate,
    CostWeights,
    FilterConfig,
    ScoreMatrix,
    Verdict,
    accept_scene,
    assign,
    combined_cost,
    filter_candidates,
    normalize_scores,
    verdict_to_dict,
)
from ..prompt import BBox
from ..utils.logging import LOGGER

__all__ = ["load_manifest", "match_scene", "run_match"]


def load_manifest(path: Union[str, Path]) -> List[Dict[str, Any]]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedManifest(f"{path}: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(data, dict) or not isinstance(data.get("scenes", []), list):
        raise MalformedManifest(f"{path}: expected an object with a 'scenes' list")
    scenes = data.get("scenes", [])
    for i, scene in enumerate(scenes):
        if not isinstance(scene, dict) or "scene_id" not in scene or "scores" not in scene:
            raise MalformedManifest(f"{path}: scene {i} needs 'scene_id' and 'scores'")
    return scenes


def _reason_code(reason: str) -> str:
    return reason.split("(", 1)[0]


def match_scene(
    scene: Dict[str, Any],
    weights: CostWeights,
    thresholds: AcceptThresholds,
    normalize: Optional[str] = "minmax",
    filter_cfg: FilterConfig = FilterConfig(),
) -> Dict[str, Any]:
    scene_id = str(scene["scene_id"])
    try:
        scores = ScoreMatrix.from_dict(scene["scores"])
    except (DataError, TypeError, ValueError) as e:
        raise MalformedManifest(f"scene {scene_id}: {e}") from e
    if scores.shape[0] == 0:
        raise MalformedManifest(f"scene {scene_id}: no subjects")

    columns = list(range(scores.shape[1]))
    if "candidates" in scene:
        try:
            candidates = [Candidate(BBox.from_seq(c["box"]), float(c.get("score", 1.0))) for c in scene["candidates"]]
        except (KeyError, TypeError, AttributeError) as e:
            raise MalformedManifest(f"scene {scene_id}: bad candidate ({e!r})") from e
        if len(candidates) != scores.shape[1]:
            raise MalformedManifest(
                f"scene {scene_id}: {len(candidates)} candidates but {scores.shape[1]} score columns"
            )
        # one surviving box per subject; the corpus-level min_subjects does not apply here
        filtered = filter_candidates(candidates, replace(filter_cfg, min_subjects=scores.shape[0]))
        if not filtered.accepted:
            return verdict_to_dict(scene_id, None, Verdict(False, filtered.reasons))
        columns = list(filtered.kept)

    kept = ScoreMatrix(scores.s_t[:, columns], scores.s_d[:, columns], scores.s_i[:, columns])
    for_cost = normalize_scores(kept, normalize) if normalize else kept
    a = assign(combined_cost(for_cost, weights))
    if a.accepted:
        # report original candidate indices
        a = Assignment(tuple((i, columns[j]) for i, j in a.pairs), a.total_cost, a.verdict)
    verdict = accept_scene(a, scores, thresholds)
    return verdict_to_dict(scene_id, a, verdict)


def run_match(
    manifest: Union[str, Path],
    weights: CostWeights = CostWeights(),
    thresholds: AcceptThresholds = AcceptThresholds(),
    output: Optional[Union[str, Path]] = None,
    normalize: Optional[str] = "minmax",
    filter_cfg: FilterConfig = FilterConfig(),
) -> Dict[str, Any]:
    """Match every scene of ``manifest``; writes ``{"verdicts": [...], "summary": {...}}`` to ``output``."""
    scenes = load_manifest(manifest)
    verdicts = [match_scene(s, weights, thresholds, normalize, filter_cfg) for s in scenes]

    by_reason = Counter(_reason_code(r) for v in verdicts if v["verdict"] == "rejected" for r in v["reasons"])
    accepted = sum(1 for v in verdicts if v["verdict"] == "accepted")
    summary = {
        "n_scenes": len(verdicts),
        "accepted": accepted,
        "rejected": len(verdicts) - accepted,
        "by_reason": dict(sorted(by_reason.items())),
        "mean_total_cost": (
            float(np.mean([v["total_cost"] for v in verdicts if v["total_cost"] is not None]))
            if any(v["total_cost"] is not None for v in verdicts)
            else None
        ),
    }
    result = {"verdicts": verdicts, "summary": summary}
    LOGGER.info(f"Matched {summary['n_scenes']} scene(s): {accepted} accepted, {summary['rejected']} rejected")

    if output is not None:
        output = Path(output)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    return result
