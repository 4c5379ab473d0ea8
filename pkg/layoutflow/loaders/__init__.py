from .registry import GLOBAL_CONFIG, register, create_from_config
from .yaml_utils import load_config, merge_dict, parse_cli, get_by_path
