import os
import copy
from typing import Any, Dict, List, Optional, Union
from pathlib import Path

import yaml

from ..errors import InvalidConfig

__all__ = [
    "load_config",
    "merge_dict",
    "parse_cli",
    "get_by_path",
]


INCLUDE_KEY = "__include__"


def load_config(file_path: Union[str, Path], cfg: Optional[Dict] = None) -> Dict:
    """
    Load a YAML (or JSON) config, resolving ``__include__`` lists relative to the including file.
    Keys of the including file win over the included ones.
    """
    file_path = str(file_path)
    _, ext = os.path.splitext(file_path)
    if ext not in [".yml", ".yaml", ".json"]:
        raise InvalidConfig(file_path, "only .yml, .yaml and .json config files are supported")

    cfg = {} if cfg is None else cfg
    with open(file_path) as f:
        try:
            file_cfg = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise InvalidConfig(file_path, f"cannot parse config: {e}") from e
    if file_cfg is None:
        return cfg
    if not isinstance(file_cfg, dict):
        raise InvalidConfig(file_path, "top level of a config file must be a mapping")

    for base in file_cfg.pop(INCLUDE_KEY, []) or []:
        base = os.path.expanduser(base)
        if not os.path.isabs(base):
            base = os.path.join(os.path.dirname(file_path), base)
        merge_dict(cfg, load_config(base))

    return merge_dict(cfg, file_cfg)


def merge_dict(dct: Dict, another_dct: Dict, inplace: bool = True) -> Dict:
    """merge another_dct into dct"""

    def _merge(dct, another) -> Dict:
        for k in another:
            if k in dct and isinstance(dct[k], dict) and isinstance(another[k], dict):
                _merge(dct[k], another[k])
            else:
                dct[k] = copy.deepcopy(another[k])

        return dct

    if not inplace:
        dct = copy.deepcopy(dct)

    return _merge(dct, another_dct)


def dictify(s: str, v: Any) -> Dict:
    if "." not in s:
        return {s: v}
    key, rest = s.split(".", 1)
    return {key: dictify(rest, v)}


def parse_cli(nargs: Optional[List[str]]) -> Dict:
    """
    parse command-line overrides
        convert `a.c=3 b=10` to `{'a': {'c': 3}, 'b': 10}`
    """
    cfg = {}
    if not nargs:
        return cfg

    for s in nargs:
        s = s.strip()
        if "=" not in s:
            raise InvalidConfig(s, "override must look like key.path=value")
        k, v = s.split("=", 1)
        try:
            value = yaml.safe_load(v)
        except yaml.YAMLError as e:
            raise InvalidConfig(k, f"cannot parse override value {v!r}: {e}") from e
        cfg = merge_dict(cfg, dictify(k, value))

    return cfg


def get_by_path(cfg: Dict, path: str, default: Any = None) -> Any:
    node = cfg
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node
