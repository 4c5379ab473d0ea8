"""
Scene archive on disk::

    root/
      index.json        {"height": 32, "width": 32, "palette": {...},
                         "scenes": [{"image": "000000.png", "layout": "000000.json"}, ...]}
      000000.png
      000000.json       layout JSON of the scene
"""

import json
from pathlib import Path
from typing import Iterable, List, Tuple, Union

from ..errors import MalformedManifest
from ..flowmatch import ToyScene
from ..prompt import dump_layout, load_layout
from ..utils.logging import LOGGER
from .layout import LayoutSpec
from .palette import Palette

__all__ = ["write_scene_archive", "read_scene_archive", "INDEX_FILE"]

INDEX_FILE = "index.json"


def write_scene_archive(root: Union[str, Path], items: Iterable[Tuple[LayoutSpec, ToyScene]]) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    first = None
    for i, (spec, scene) in enumerate(items):
        first = first or spec
        stem = f"{i:06d}"
        scene.to_image().save(root / f"{stem}.png")
        dump_layout(spec.to_document(), root / f"{stem}.json")
        entries.append({"image": f"{stem}.png", "layout": f"{stem}.json"})

    index = {"scenes": entries}
    if first is not None:
        p = first.palette
        index.update(
            height=first.height,
            width=first.width,
            palette={"names": list(p.names), "colors": [list(c) for c in p.colors], "background": list(p.background)},
        )
    (root / INDEX_FILE).write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    LOGGER.info(f"Wrote {len(entries)} scene(s) to {root}")
    return root


def read_scene_archive(root: Union[str, Path]) -> List[Tuple[LayoutSpec, ToyScene]]:
    root = Path(root)
    index_path = root / INDEX_FILE
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MalformedManifest(f"{index_path} does not exist") from None
    except json.JSONDecodeError as e:
        raise MalformedManifest(f"{index_path}: {e.msg}", e.lineno, e.colno) from e

    scenes = index.get("scenes", [])
    if not scenes:
        return []
    try:
        palette = Palette.from_dict(index["palette"])
        height, width = int(index["height"]), int(index["width"])
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedManifest(f"{index_path}: bad header ({e!r})") from e

    items = []
    for entry in scenes:
        doc = load_layout(root / entry["layout"])
        spec = LayoutSpec.from_document(doc, height, width, palette)
        items.append((spec, ToyScene.from_image(root / entry["image"])))
    return items
