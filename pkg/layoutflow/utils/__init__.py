from .logger import SmoothedValue, MetricLogger
from .seeding import derive_seed, numpy_rng, torch_generator
from .smart_defaults import infer_config_path, infer_output_path
