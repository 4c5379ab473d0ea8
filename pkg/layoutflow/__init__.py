__version__ = "0.1.0"

from .errors import LayoutflowError
from .loaders import GLOBAL_CONFIG, register, load_config
from .prompt import BBox, LayoutPrompt, parse_prompt, serialize_prompt, strip_coordinates
from .guidance import GuidanceConfig, hierarchical_fuse
from .flowmatch import ToyScene, sample, train
from .metrics import ScoreSummary, summarize
from .pipeline import assign, combined_cost
from .harness import ExperimentConfig, run_benchmark, run_match
