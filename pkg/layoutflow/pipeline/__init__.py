from .placement import PlacementConfig, sample_placement, sample_subject_set
from .filtering import Candidate, FilterConfig, FilterResult, filter_candidates, crop_gate, refine_gate
from .assignment import (
    ScoreTriple,
    ScoreMatrix,
    CostWeights,
    AcceptThresholds,
    Verdict,
    Assignment,
    normalize_scores,
    combined_cost,
    assign,
    accept_scene,
)
from .backends import CopyPasteOutpainter, verdict_to_dict
