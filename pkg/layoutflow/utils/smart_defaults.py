"""
This module contains utility functions for smart defaults.
"""

import os
from pathlib import Path
from typing import Dict, Optional, Union

from ..errors import InvalidConfig

OUTPUT_DIR_ENV = "LAYOUTFLOW_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "output"
CONFIG_ROOT = Path(__file__).parent.parent / "configs"


def find_config_files() -> Dict[str, Path]:
    """
    Find all config files in the package's configs/ folder.
    Returns a dict mapping config stem (and file name) to full path.
    """
    config_files = {}
    if CONFIG_ROOT.exists():
        for file in sorted(CONFIG_ROOT.rglob("*.yml")):
            config_files[file.name] = file
            config_files[file.stem] = file
    return config_files


def infer_config_path(config: Union[str, Path]) -> Path:
    """
    Use ``config`` directly when it is an existing file, otherwise look it up by name among
    the packaged configs (``sweep_desk`` or ``sweep_desk.yml``).
    """
    path = Path(config)
    if path.exists():
        return path

    packaged = find_config_files()
    if str(config) in packaged:
        return packaged[str(config)]

    names = sorted(k for k in packaged if "." not in k)
    raise InvalidConfig(str(config), f"no such file and no packaged config of that name; packaged: {names}")


def infer_output_path(output_path: Optional[Union[str, Path]] = None, unique: bool = True) -> Path:
    """
    Resolve the run output directory.

    ``$LAYOUTFLOW_OUTPUT_DIR`` wins over the argument. When ``unique`` is set and the directory
    already exists, ``_1``, ``_2``... are appended until a free path is found.

    Example
    -------
    - input: ./outputs            -> ./outputs          (did not exist)
    - input: ./outputs            -> ./outputs_1        (./outputs already exists)
    """
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        output_path = env_dir
    if output_path is None:
        output_path = DEFAULT_OUTPUT_DIR

    output_path = Path(output_path)
    if unique and output_path.exists():
        counter = 1
        while True:
            candidate = output_path.parent / f"{output_path.name}_{counter}"
            if not candidate.exists():
                output_path = candidate
                break
            counter += 1

    output_path.mkdir(parents=True, exist_ok=True)
    return output_path
