import copy
import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..errors import InvalidConfig
from ..flowmatch import SamplerConfig, TrainConfig
from ..guidance import GuidanceConfig
from ..loaders import get_by_path, load_config, merge_dict
from ..pipeline import AcceptThresholds, CostWeights, FilterConfig
from ..scenes import DEFAULT_PALETTE, LayoutSamplerConfig, Palette
from ..utils.smart_defaults import infer_config_path

__all__ = ["ExperimentConfig"]

SECTIONS = {
    "seed",
    "output_dir",
    "print_freq",
    "use_wandb",
    "dataset",
    "train",
    "sampler",
    "guidance",
    "sweep",
    "eval",
    "match",
}


class ExperimentConfig(object):
    """
    Harness configuration built from a merged YAML dict. Plain attributes hold run-level settings;
    the component configs (layout sampler, trainer, sampler, guidance) are built on first access.
    """

    def __init__(self, cfg: Optional[Dict[str, Any]] = None, **overrides) -> None:
        cfg = merge_dict(copy.deepcopy(cfg or {}), overrides)
        unknown = set(cfg) - SECTIONS
        if unknown:
            raise InvalidConfig("config", f"unknown top-level keys {sorted(unknown)}")
        self.yaml_cfg = cfg

        self.seed: int = int(cfg.get("seed", 0))
        self.output_dir: str = cfg.get("output_dir", "output")
        self.print_freq: int = int(cfg.get("print_freq", 50))
        self.use_wandb: bool = bool(cfg.get("use_wandb", False))

        self.n_train: int = int(get_by_path(cfg, "dataset.n_train", 1000))
        self.n_heldout: int = int(get_by_path(cfg, "dataset.n_heldout", 200))
        if self.n_train < 1 or self.n_heldout < 1:
            raise InvalidConfig("dataset", f"n_train and n_heldout must be >= 1, got {self.n_train}, {self.n_heldout}")

        self.sweep: List[float] = [float(s) for s in get_by_path(cfg, "sweep.s_coord", [1.0])]
        if not self.sweep:
            raise InvalidConfig("sweep.s_coord", "needs at least one value")
        if not all(math.isfinite(s) and s >= 0 for s in self.sweep):
            raise InvalidConfig("sweep.s_coord", f"values must be finite and >= 0, got {self.sweep}")
        if self.sweep != sorted(self.sweep):
            raise InvalidConfig("sweep.s_coord", f"values must be sorted ascending, got {self.sweep}")
        self.baseline: bool = bool(get_by_path(cfg, "sweep.baseline", True))

        self.detect_tol: float = float(get_by_path(cfg, "eval.tol", 0.25))
        self.min_area: int = int(get_by_path(cfg, "eval.min_area", 4))
        self.text_scorer = get_by_path(cfg, "eval.text_scorer", "color_match")
        self.image_scorer = get_by_path(cfg, "eval.image_scorer", "box_iou")

        self._palette: Optional[Palette] = None
        self._layout: Optional[LayoutSamplerConfig] = None
        self._train: Optional[TrainConfig] = None
        self._guidance: Optional[GuidanceConfig] = None
        self._sampler: Optional[SamplerConfig] = None

        self.train_config
        self.sampler_config
        self.palette.check_separable(self.detect_tol)

    @classmethod
    def from_file(cls, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        cfg = load_config(infer_config_path(path))
        return cls(cfg, **(overrides or {}))

    @property
    def palette(self) -> Palette:
        if self._palette is None:
            spec = get_by_path(self.yaml_cfg, "dataset.palette")
            self._palette = DEFAULT_PALETTE if spec is None else Palette.from_dict(spec)
        return self._palette

    @property
    def layout_config(self) -> LayoutSamplerConfig:
        if self._layout is None:
            self._layout = LayoutSamplerConfig.from_dict(get_by_path(self.yaml_cfg, "dataset.layout", {}))
        return self._layout

    @property
    def train_config(self) -> TrainConfig:
        if self._train is None:
            cfg = dict(self.yaml_cfg.get("train") or {})
            cfg.setdefault("seed", self.seed)
            cfg.setdefault("print_freq", self.print_freq)
            cfg.setdefault("classes", list(self.palette.names))
            cfg.setdefault("height", self.layout_config.height)
            cfg.setdefault("width", self.layout_config.width)
            self._train = TrainConfig.from_dict(cfg)
        return self._train

    @property
    def guidance(self) -> GuidanceConfig:
        if self._guidance is None:
            self._guidance = GuidanceConfig.from_dict(self.yaml_cfg.get("guidance"))
        return self._guidance

    @property
    def sampler_config(self) -> SamplerConfig:
        if self._sampler is None:
            cfg = dict(self.yaml_cfg.get("sampler") or {})
            cfg.setdefault("seed", self.seed)
            self._sampler = SamplerConfig.from_dict(cfg)
            self._sampler.guidance = self.guidance
        return self._sampler

    def sampler_for(self, s_coord: Optional[float]) -> SamplerConfig:
        """Sampler settings for one sweep point; ``None`` turns the coordinate branch off."""
        if s_coord is None:
            guidance = replace(self.guidance, coord_enabled=False)
        else:
            guidance = replace(self.guidance.with_coord_scale(s_coord), coord_enabled=True)
        return replace(self.sampler_config, guidance=guidance)

    @property
    def match_weights(self) -> CostWeights:
        return CostWeights.from_dict(get_by_path(self.yaml_cfg, "match.weights"))

    @property
    def match_thresholds(self) -> AcceptThresholds:
        return AcceptThresholds.from_dict(get_by_path(self.yaml_cfg, "match.thresholds"))

    @property
    def match_filter(self) -> FilterConfig:
        return FilterConfig.from_dict(get_by_path(self.yaml_cfg, "match.filter"))

    @property
    def match_normalize(self) -> str:
        return get_by_path(self.yaml_cfg, "match.normalize", "minmax")

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.yaml_cfg)

    def config_hash(self) -> str:
        hashed = {k: v for k, v in self.yaml_cfg.items() if k != "output_dir"}
        body = json.dumps(hashed, sort_keys=True, separators=(",", ":"), default=str)
        return "sha256:" + hashlib.sha256(body.encode("utf-8")).hexdigest()
