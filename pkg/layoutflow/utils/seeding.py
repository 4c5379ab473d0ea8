"""
Root-seed splitting.

Every random draw in layoutflow comes from ``derive_seed(root, stage, index)`` so that any stage
can be re-run on its own and reproduce the same numbers. Stage counters are fixed:

    0  dataset layouts        1  model init           2  training batches, t, noise, dropout
    3  held-out layouts       4  sampling noise       5  pipeline placement
    6  pipeline subject sets
"""

import numpy as np
import torch

__all__ = [
    "STAGE_DATASET",
    "STAGE_MODEL_INIT",
    "STAGE_TRAIN",
    "STAGE_HELDOUT",
    "STAGE_SAMPLE",
    "STAGE_PLACEMENT",
    "STAGE_SUBJECTS",
    "derive_seed",
    "numpy_rng",
    "torch_generator",
]

STAGE_DATASET = 0
STAGE_MODEL_INIT = 1
STAGE_TRAIN = 2
STAGE_HELDOUT = 3
STAGE_SAMPLE = 4
STAGE_PLACEMENT = 5
STAGE_SUBJECTS = 6


def derive_seed(root: int, stage: int, index: int = 0) -> int:
    seq = np.random.SeedSequence(int(root), spawn_key=(int(stage), int(index)))
    return int(seq.generate_state(1, dtype=np.uint64)[0]) & 0x7FFF_FFFF_FFFF_FFFF


def numpy_rng(root: int, stage: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, stage, index))


def torch_generator(root: int, stage: int, index: int = 0) -> torch.Generator:
    gen = torch.Generator(device="cpu")
    gen.manual_seed(derive_seed(root, stage, index))
    return gen
