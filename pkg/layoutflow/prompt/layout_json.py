"""
Layout JSON, the source of truth for grounded captions::

    {"caption": "3 dogs play in the park.",
     "instances": [{"subject": "dogs", "boxes": [[0.1, 0.2, 0.3, 0.4], ...], "source_image": null}]}
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..errors import MalformedManifest
from .bbox import BBox
from .grammar import InstanceTag, LayoutPrompt

__all__ = ["LayoutDocument", "load_layout", "dump_layout", "layout_to_prompt", "prompt_to_layout"]


@dataclass
class LayoutDocument:
    caption: str
    instances: List[InstanceTag] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "caption": self.caption,
            "instances": [
                {
                    "subject": tag.subject_phrase,
                    "boxes": [list(b.as_tuple()) for b in tag.boxes],
                    "source_image": tag.source_image,
                }
                for tag in self.instances
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayoutDocument":
        if not isinstance(data, dict) or not isinstance(data.get("caption"), str):
            raise MalformedManifest("layout must be an object with a string 'caption'")
        instances = []
        for i, inst in enumerate(data.get("instances", [])):
            try:
                boxes = tuple(BBox.from_seq(b) for b in inst["boxes"])
                subject = str(inst["subject"])
                source = inst.get("source_image")
            except (KeyError, TypeError) as e:
                raise MalformedManifest(f"instance {i}: {e!r}") from e
            instances.append(InstanceTag(subject, len(boxes), boxes, None if source is None else int(source)))
        return cls(data["caption"], instances)


def load_layout(path: Union[str, Path]) -> LayoutDocument:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedManifest(f"{path}: {e.msg}", e.lineno, e.colno) from e
    return LayoutDocument.from_dict(data)


def dump_layout(doc: LayoutDocument, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(doc.to_dict(), indent=2) + "\n", encoding="utf-8")


def layout_to_prompt(doc: LayoutDocument) -> LayoutPrompt:
    """
    Insert each instance's tags right after the first mention of its subject in the caption,
    scanning left to right. A leading ``"<count> "`` already present in the caption is absorbed into
    the tag; subjects never mentioned are appended at the end.
    """
    parts: List[Union[str, InstanceTag]] = []
    caption, pos = doc.caption, 0
    trailing: List[InstanceTag] = []
    for tag in doc.instances:
        m = re.compile(rf"(?<!\w){re.escape(tag.subject_phrase)}(?!\w)").search(caption, pos)
        if not tag.subject_phrase or m is None:
            trailing.append(tag)
            continue
        start = m.start()
        prefix = f"{tag.count} "
        if tag.count > 1 and caption[:start].endswith(prefix):
            start -= len(prefix)
        parts.append(caption[pos:start])
        parts.append(tag)
        pos = m.end()
    parts.append(caption[pos:])
    for tag in trailing:
        parts.append(" ")
        parts.append(tag)
    return LayoutPrompt.from_parts(*parts)


def prompt_to_layout(p: LayoutPrompt, caption: Optional[str] = None) -> LayoutDocument:
    return LayoutDocument(p.original_caption if caption is None else caption, list(p.tags))
