from .scene import ToyScene
from .condition import (
    ClassVocab,
    DropFlags,
    ConditionEmbedding,
    encode_condition,
    FULL,
    DROP_COORD,
    DROP_TEXT,
    DROP_ALL,
)
from .model import ModelConfig, VelocityMLP
from .path import interpolate, fm_loss, shift_timestep
from .trainer import TrainConfig, TrainResult, FlowMatchTrainer, train, build_model, save_checkpoint, load_checkpoint
from .sampler import SamplerConfig, sample, sample_batch, timestep_schedule
