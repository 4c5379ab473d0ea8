from ..utils.box_ops import box_iou
from .matching import SUCCESS_IOU, EvalRecord, MatchResult, iou, match_instances
from .similarity import (
    CropPair,
    SimilarityResult,
    ConstantScorer,
    BoxIoUScorer,
    ColorMatchScorer,
    aggregate_similarity,
    pairs_from_records,
    crop_scene,
    build_scorer,
)
from .coco_position import (
    COCO_IOU_THRESHOLDS,
    ScoreSummary,
    instance_success_ratio,
    image_success_ratio,
    mean_iou,
    average_precision,
    match_records,
    summarize,
)
from .report import TABLE_COLUMNS, table_row, write_table_csv, write_summary_json
