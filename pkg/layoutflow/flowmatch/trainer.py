import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import torch

from ..errors import DataError, InvalidConfig, NonFinite, ShapeMismatch, TrainingDiverged
from ..prompt import LayoutPrompt
from ..utils import MetricLogger, SmoothedValue
from ..utils.logging import LOGGER, ExperimentLogger
from ..utils.seeding import STAGE_MODEL_INIT, STAGE_TRAIN, derive_seed, torch_generator
from .condition import DROP_ALL, DROP_COORD, DROP_TEXT, FULL, ClassVocab, encode_condition
from .model import ModelConfig, VelocityMLP
from .path import fm_loss
from .scene import ToyScene

__all__ = [
    "TrainConfig",
    "TrainResult",
    "FlowMatchTrainer",
    "train",
    "build_model",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_FORMAT",
]

CHECKPOINT_FORMAT = "layoutflow-mlp"
CHECKPOINT_VERSION = 2

# order of the precomputed conditionings per training example
DROP_MODES = (FULL, DROP_COORD, DROP_TEXT, DROP_ALL)

Example = Tuple[LayoutPrompt, ToyScene]


@dataclass
class TrainConfig:
    seed: int = 0
    epochs: int = 1
    max_steps: Optional[int] = None
    lr: float = 1e-3
    batch_size: int = 64
    optimizer: str = "SGD"
    optimizer_kwargs: Dict[str, Any] = field(default_factory=dict)
    p_drop_coord: float = 0.1
    p_drop_text: float = 0.1
    p_drop_all: float = 0.1
    lambda_fm: float = 1.0
    max_norm: float = 0.0
    divergence_threshold: float = 1e6
    print_freq: int = 50
    height: int = 32
    width: int = 32
    channels: int = 3
    classes: List[str] = field(default_factory=list)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        for name in ("p_drop_coord", "p_drop_text", "p_drop_all"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise InvalidConfig(f"train.{name}", f"must lie in [0, 1], got {p}")
        if self.p_drop_coord + self.p_drop_text + self.p_drop_all > 1:
            raise InvalidConfig("train", "drop probabilities must sum to at most 1")
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0:
            raise InvalidConfig(
                "train", f"need epochs >= 0, batch_size >= 1, lr > 0; got {self.epochs}, {self.batch_size}, {self.lr}"
            )
        if not hasattr(torch.optim, self.optimizer):
            raise InvalidConfig("train.optimizer", f"torch.optim has no optimizer '{self.optimizer}'")

    @property
    def scene_shape(self) -> Tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "TrainConfig":
        cfg = dict(cfg or {})
        scene = cfg.pop("scene", None) or {}
        cfg.update({k: scene[k] for k in ("height", "width", "channels") if k in scene})
        known = set(cls.__dataclass_fields__)
        unknown = set(cfg) - known
        if unknown:
            raise InvalidConfig("train", f"unknown keys {sorted(unknown)}")
        return cls(**cfg)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["model"] = self.model.to_dict()
        return out


@dataclass
class TrainResult:
    model: VelocityMLP
    vocab: ClassVocab
    history: List[float]
    steps: int


def build_model(cfg: TrainConfig, vocab: ClassVocab) -> VelocityMLP:
    """Initialize from the model-init seed without touching the global torch RNG."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(cfg.seed, STAGE_MODEL_INIT))
        return VelocityMLP(cfg.scene_shape, vocab.cond_dim, cfg.model)


def _pick_modes(u: torch.Tensor, cfg: TrainConfig) -> torch.Tensor:
    """Map uniform draws to indices into ``DROP_MODES``."""
    modes = torch.zeros_like(u, dtype=torch.long)
    edge_all = cfg.p_drop_all
    edge_text = edge_all + cfg.p_drop_text
    edge_coord = edge_text + cfg.p_drop_coord
    modes[u < edge_coord] = 1
    modes[u < edge_text] = 2
    modes[u < edge_all] = 3
    return modes


class FlowMatchTrainer(object):
    def __init__(
        self,
        cfg: TrainConfig,
        vocab: Optional[ClassVocab] = None,
        loggers: Optional[Union[List[ExperimentLogger], ExperimentLogger]] = None,
    ):
        self.cfg = cfg
        self.vocab = vocab or ClassVocab(cfg.classes)
        if loggers is None:
            loggers = []
        self.loggers = [loggers] if isinstance(loggers, ExperimentLogger) else list(loggers)

    def _prepare(self, dataset: Sequence[Example]) -> Tuple[torch.Tensor, torch.Tensor]:
        if len(dataset) == 0:
            raise DataError("training dataset is empty")
        scenes = torch.stack([scene.to_tensor() for _, scene in dataset])
        if tuple(scenes.shape[1:]) != self.cfg.scene_shape:
            raise ShapeMismatch(f"scenes are {tuple(scenes.shape[1:])}, config expects {self.cfg.scene_shape}")
        conds = torch.stack(
            [
                torch.stack([encode_condition(prompt, self.vocab, mode).pooled for mode in DROP_MODES])
                for prompt, _ in dataset
            ]
        )
        return scenes, conds

    def _build_optimizer(self, model: VelocityMLP) -> torch.optim.Optimizer:
        optim_cls = getattr(torch.optim, self.cfg.optimizer)
        return optim_cls(model.parameters(), lr=self.cfg.lr, **self.cfg.optimizer_kwargs)

    def fit(self, dataset: Sequence[Example]) -> TrainResult:
        cfg = self.cfg
        model = build_model(cfg, self.vocab)
        history: List[float] = []
        for lg in self.loggers:
            lg.log_hyperparams(cfg.to_dict())

        if cfg.epochs == 0 or cfg.max_steps == 0:
            LOGGER.info("No training requested, returning the initial parameters")
            model.requires_grad_(False).eval()
            return TrainResult(model, self.vocab, history, 0)

        scenes, conds = self._prepare(dataset)
        optimizer = self._build_optimizer(model)
        generator = torch_generator(cfg.seed, STAGE_TRAIN)
        n = scenes.shape[0]
        steps_per_epoch = math.ceil(n / cfg.batch_size)
        LOGGER.info(
            f"Training on {n} scenes, {cfg.epochs} epoch(s) x {steps_per_epoch} step(s), "
            f"optimizer {cfg.optimizer} lr={cfg.lr}"
        )

        step = 0
        for epoch in range(cfg.epochs):
            model.train()
            stats = self.train_one_epoch(model, optimizer, scenes, conds, generator, epoch, step, history)
            step = len(history)
            for lg in self.loggers:
                lg.log_metrics({"epoch": epoch, **stats}, step)
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break

        model.requires_grad_(False).eval()
        return TrainResult(model, self.vocab, history, step)

    def train_one_epoch(
        self,
        model: VelocityMLP,
        optimizer: torch.optim.Optimizer,
        scenes: torch.Tensor,
        conds: torch.Tensor,
        generator: torch.Generator,
        epoch: int,
        global_step: int,
        history: List[float],
    ) -> Dict[str, float]:
        cfg = self.cfg
        n = scenes.shape[0]
        order = torch.randperm(n, generator=generator)
        batches = [order[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        if cfg.max_steps is not None:
            batches = batches[: max(cfg.max_steps - global_step, 0)]

        metric_logger = MetricLogger(delimiter="  ")
        metric_logger.add_meter("lr", SmoothedValue(window_size=1, fmt="{value:.6f}"))
        header = "Epoch: [{}]".format(epoch)

        for idx in metric_logger.log_every(batches, cfg.print_freq, header, start_step=global_step):
            step = len(history)
            x0 = scenes[idx]
            x1 = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
            t = torch.rand(x0.shape[0], generator=generator, dtype=x0.dtype)
            modes = _pick_modes(torch.rand(x0.shape[0], generator=generator), cfg)
            cond = conds[idx, modes]

            try:
                loss = cfg.lambda_fm * fm_loss(model, x0, x1, t, cond)
            except NonFinite as e:
                raise TrainingDiverged(step, float("nan")) from e
            loss_value = loss.item()
            if not math.isfinite(loss_value) or loss_value > cfg.divergence_threshold:
                LOGGER.error(f"Loss is {loss_value} at step {step}, stopping training")
                raise TrainingDiverged(step, loss_value)

            optimizer.zero_grad()
            loss.backward()
            if cfg.max_norm > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.max_norm)
            optimizer.step()

            history.append(loss_value)
            metric_logger.update(loss=loss_value)
            metric_logger.update(lr=optimizer.param_groups[0]["lr"])

        if "loss" not in metric_logger.meters:
            return {}
        LOGGER.info(f"Averaged stats: {metric_logger}")
        return metric_logger.averages()


def train(
    cfg: Union[TrainConfig, Dict[str, Any]],
    dataset: Sequence[Example],
    vocab: Optional[ClassVocab] = None,
    loggers: Optional[Union[List[ExperimentLogger], ExperimentLogger]] = None,
) -> TrainResult:
    if isinstance(cfg, dict):
        cfg = TrainConfig.from_dict(cfg)
    return FlowMatchTrainer(cfg, vocab, loggers).fit(dataset)


def save_checkpoint(model: VelocityMLP, vocab: ClassVocab, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_shapes": model.layer_shapes(),
        "state_dict": model.state_dict(),
        "model": model.spec(),
        "vocab": list(vocab.names),
    }
    torch.save(state, path)
    LOGGER.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[VelocityMLP, ClassVocab]:
    state = torch.load(path, map_location="cpu", weights_only=True)
    if state.get("format") != CHECKPOINT_FORMAT or state.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path} is not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} checkpoint")
    model = VelocityMLP.from_spec(state["model"])
    if model.layer_shapes() != state["layer_shapes"]:
        raise ShapeMismatch(f"checkpoint layer shapes {state['layer_shapes']} do not match {model.layer_shapes()}")
    model.load_state_dict(state["state_dict"])
    model.requires_grad_(False).eval()
    return model, ClassVocab(state["vocab"])
