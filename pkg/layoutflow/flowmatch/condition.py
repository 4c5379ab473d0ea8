"""
Layout conditioning for the toy generator.

Every instance becomes ``[one-hot class (C) | x1 y1 x2 y2]``. The pooled scene vector the network
sees has ``C + 1`` rows of ``[count, mean x1, mean y1, mean x2, mean y2]``: one row per class plus a
last row for instances whose class was dropped. Class names mentioned in plain text without a box
count as instances with zero coordinates, so a coordinate-stripped prompt encodes exactly like the
same prompt with its coordinates dropped.
"""

import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import torch

from ..errors import InvalidConfig, UnknownClass
from ..prompt import LayoutPrompt, PlainText, Tagged

__all__ = ["ClassVocab", "DropFlags", "ConditionEmbedding", "encode_condition", "stack_pooled"]

ROW_WIDTH = 5


class ClassVocab(object):
    def __init__(self, names: Sequence[str]):
        names = [str(n) for n in names]
        if not names:
            raise InvalidConfig("classes", "class vocabulary is empty")
        if len(set(n.lower() for n in names)) != len(names):
            raise InvalidConfig("classes", f"class names must be unique (case-insensitive): {names}")
        self.names: Tuple[str, ...] = tuple(names)
        self._index: Dict[str, int] = {n.lower(): i for i, n in enumerate(names)}
        alternation = "|".join(re.escape(n) for n in sorted(names, key=len, reverse=True))
        self._mention = re.compile(rf"(?:(?<![\w.])(\d+) )?(?<!\w)({alternation})(?!\w)", re.IGNORECASE)

    def __len__(self) -> int:
        return len(self.names)

    def __repr__(self) -> str:
        return f"ClassVocab({list(self.names)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassVocab) and self.names == other.names

    def index(self, name: str) -> int:
        try:
            return self._index[name.strip().lower()]
        except KeyError:
            raise UnknownClass(f"'{name}' is not in the class vocabulary {list(self.names)}") from None

    def mentions(self, text: str) -> List[int]:
        """Class ids of untagged mentions in ``text``, repeated by a count prefix (``2 red_rect``)."""
        ids = []
        for m in self._mention.finditer(text):
            n = int(m.group(1)) if m.group(1) and int(m.group(1)) >= 2 else 1
            ids.extend([self.index(m.group(2))] * n)
        return ids

    @property
    def cond_dim(self) -> int:
        return (len(self) + 1) * ROW_WIDTH


@dataclass(frozen=True)
class DropFlags:
    text: bool = False
    coord: bool = False

    @property
    def all(self) -> bool:
        return self.text and self.coord


FULL = DropFlags()
DROP_COORD = DropFlags(coord=True)
DROP_TEXT = DropFlags(text=True)
DROP_ALL = DropFlags(text=True, coord=True)


@dataclass(frozen=True)
class ConditionEmbedding:
    instances: torch.Tensor  # [N, C + 4]
    pooled: torch.Tensor  # [(C + 1) * 5]
    text_dropped: bool
    coord_dropped: bool

    def coords(self) -> torch.Tensor:
        return self.instances[:, -4:]

    def classes(self) -> torch.Tensor:
        return self.instances[:, :-4]


def _instances(p: LayoutPrompt, vocab: ClassVocab) -> List[Tuple[int, Tuple[float, ...]]]:
    out = []
    for span in p.spans:
        if isinstance(span, Tagged):
            class_id = vocab.index(span.tag.subject_phrase)
            out.extend((class_id, b.as_tuple()) for b in span.tag.boxes)
        elif isinstance(span, PlainText):
            out.extend((class_id, (0.0, 0.0, 0.0, 0.0)) for class_id in vocab.mentions(span.text))
    return out


def encode_condition(
    p: LayoutPrompt, vocab: ClassVocab, drop: DropFlags = FULL, dtype=torch.float32
) -> ConditionEmbedding:
    num_classes = len(vocab)
    items = _instances(p, vocab)

    instances = torch.zeros((len(items), num_classes + 4), dtype=dtype)
    for row, (class_id, coords) in enumerate(items):
        if not drop.text:
            instances[row, class_id] = 1.0
        if not drop.coord:
            instances[row, num_classes:] = torch.tensor(coords, dtype=dtype)

    pooled = torch.zeros((num_classes + 1, ROW_WIDTH), dtype=dtype)
    if not drop.all:
        for row, (class_id, _) in enumerate(items):
            slot = num_classes if drop.text else class_id
            pooled[slot, 0] += 1.0
            pooled[slot, 1:] += instances[row, num_classes:]
        counts = pooled[:, :1].clamp(min=1.0)
        pooled[:, 1:] = pooled[:, 1:] / counts

    return ConditionEmbedding(instances, pooled.reshape(-1), drop.text, drop.coord)


def stack_pooled(embeddings: Iterable[ConditionEmbedding]) -> torch.Tensor:
    return torch.stack([e.pooled for e in embeddings])
