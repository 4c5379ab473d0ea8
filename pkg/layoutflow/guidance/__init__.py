from .velocity import VelocityBatch, BranchSet, GuidanceScales, NormConfig, GuidanceConfig
from .cfg import RECOMMENDED_COORD_SCALE, cfg_combine, renormalize, hierarchical_fuse, check_coord_scale
