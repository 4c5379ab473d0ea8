"""
Instance-coordinate binding prompts.

A layout prompt is ordinary caption text in which every grounded subject phrase is followed by
one or more ``<bbox>[x1,y1,x2,y2]</bbox>`` tags and, for reference-conditioned prompts, a
``from imageN`` suffix::

    The cat<bbox>[0.1,0.2,0.3,0.4]</bbox> from image1 plays with the yarn ball<bbox>[0.5,0.6,0.7,0.8]</bbox> ...
    3 dogs <bbox>[0.1,0.2,0.3,0.4]</bbox>, <bbox>[0.5,0.6,0.7,0.8]</bbox>, <bbox>[0.2,0.3,0.4,0.5]</bbox> play ...

``serialize_prompt`` is canonical and ``parse_prompt`` is tolerant; for every text produced by the
serializer ``serialize_prompt(parse_prompt(text)) == text`` holds byte for byte.
"""

import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from typing import Iterator, List, Optional, Tuple, Union

from ..errors import MalformedTag, OutOfRange
from .bbox import BBox, format_box

__all__ = [
    "InstanceTag",
    "PlainText",
    "Tagged",
    "LayoutPrompt",
    "Violation",
    "serialize_prompt",
    "parse_prompt",
    "strip_coordinates",
    "validate",
    "canonicalize_t2i",
]

OPEN_TAG = "<bbox>"
CLOSE_TAG = "</bbox>"
MAX_PHRASE_WORDS = 4

# Words that end a subject phrase when scanning backwards from a tag.
FUNCTION_WORDS = frozenset(
    """
    a an the this that these those its his her their our my your
    and or but nor with without of in on at to from by for into onto over under near beside behind
    above below between among across along around through toward towards next against
    is are was were be been being has have had do does did
    plays play sits sit stands stand lies lie holds hold
    """.split()
)

_WORD_AT_END = re.compile(r"[^\W\d][\w'\-]*$")
_COUNT_AT_END = re.compile(r"(?<![\w.])(\d+) $")
_BRACKETS = re.compile(r"^\s*\[(.*)\]\s*$", re.DOTALL)
_NUMBER = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")
_BOX_SEPARATOR = re.compile(r"\s*,\s*(?=<bbox>)")
_SOURCE_SUFFIX = re.compile(r"\s*from\s+image\s*([1-9]\d*)")


@dataclass(frozen=True)
class InstanceTag:
    subject_phrase: str
    count: int
    boxes: Tuple[BBox, ...]
    source_image: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))

    @property
    def phrase(self) -> str:
        """Subject phrase as written in the caption, including the count prefix."""
        if self.count > 1 and self.subject_phrase:
            return f"{self.count} {self.subject_phrase}"
        return self.subject_phrase

    def render(self, with_boxes: bool = True, with_source: bool = True) -> str:
        text = self.phrase
        if with_boxes:
            gap = "" if (self.source_image is not None or not text) else " "
            text += gap + ", ".join(format_box(b) for b in self.boxes)
        if with_source and self.source_image is not None:
            text += f" from image{self.source_image}"
        return text


@dataclass(frozen=True)
class PlainText:
    text: str


@dataclass(frozen=True)
class Tagged:
    tag: InstanceTag


Span = Union[PlainText, Tagged]


@dataclass(frozen=True)
class LayoutPrompt:
    spans: Tuple[Span, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))

    @property
    def tags(self) -> List[InstanceTag]:
        return [s.tag for s in self.spans if isinstance(s, Tagged)]

    @property
    def original_caption(self) -> str:
        return "".join(s.text if isinstance(s, PlainText) else s.tag.phrase for s in self.spans)

    def __str__(self) -> str:
        return serialize_prompt(self)

    @classmethod
    def from_parts(cls, *parts: Union[str, InstanceTag]) -> "LayoutPrompt":
        """Build a prompt from alternating strings and tags, merging adjacent strings."""
        spans: List[Span] = []
        for part in parts:
            if isinstance(part, InstanceTag):
                spans.append(Tagged(part))
            elif part:
                if spans and isinstance(spans[-1], PlainText):
                    spans[-1] = PlainText(spans[-1].text + part)
                else:
                    spans.append(PlainText(part))
        return cls(tuple(spans))


@dataclass(frozen=True)
class Violation:
    code: str
    tag_index: Optional[int]
    message: str

    def __str__(self) -> str:
        where = f"tag {self.tag_index}: " if self.tag_index is not None else ""
        return f"{self.code}: {where}{self.message}"


def _render_spans(p: LayoutPrompt) -> Tuple[str, List[int]]:
    """Serialized text and the end offset of every span in it."""
    pieces, ends, end = [], [], 0
    for s in p.spans:
        piece = s.text if isinstance(s, PlainText) else s.tag.render()
        end += len(piece)
        pieces.append(piece)
        ends.append(end)
    return "".join(pieces), ends


def _ambiguous_sources(p: LayoutPrompt, text: str, ends: List[int]) -> Iterator[Tuple[int, int]]:
    """``(tag index, offset)`` of every tag without a source whose following text parses as ``from imageN``."""
    idx = 0
    for s, end in zip(p.spans, ends):
        if isinstance(s, Tagged):
            if s.tag.source_image is None and s.tag.boxes and _SOURCE_SUFFIX.match(text, end):
                yield idx, end
            idx += 1


def serialize_prompt(p: LayoutPrompt) -> str:
    """
    Canonical prompt text. Raises ``MalformedTag`` when text right after a tag without a source
    image reads as a ``from imageN`` suffix that parsing would bind to the tag.
    """
    text, ends = _render_spans(p)
    for idx, end in _ambiguous_sources(p, text, ends):
        raise MalformedTag(f"text after tag {idx} reads as a 'from imageN' suffix", _byte_offset(text, end))
    return text


def strip_coordinates(p: LayoutPrompt) -> str:
    """
    Remove every box tag, keeping subject phrases, count prefixes and ``from imageN`` suffixes.
    Whitespace meeting across a removed tag collapses to one space.
    """
    out = ""
    prev_tagged = False
    for s in p.spans:
        tagged = isinstance(s, Tagged)
        piece = s.tag.render(with_boxes=False) if tagged else s.text
        if (tagged or prev_tagged) and out[-1:].isspace() and piece[:1].isspace():
            out = out.rstrip() + " " + piece.lstrip()
        else:
            out += piece
        prev_tagged = tagged
    return out


def canonicalize_t2i(p: LayoutPrompt) -> LayoutPrompt:
    """Drop every ``from imageN`` binding, turning a reference prompt into a plain layout prompt."""
    spans = [Tagged(replace(s.tag, source_image=None)) if isinstance(s, Tagged) else s for s in p.spans]
    return LayoutPrompt(tuple(spans))


def validate(p: LayoutPrompt) -> List[Violation]:
    """Empty list means the prompt is valid."""
    violations: List[Violation] = []
    subjects_by_source = {}
    for idx, tag in enumerate(p.tags):
        if not tag.subject_phrase.strip():
            violations.append(Violation("EmptySubject", idx, "tag has no subject phrase"))
        if tag.count < 1 or tag.count != len(tag.boxes):
            violations.append(
                Violation("CountMismatch", idx, f"count {tag.count} but {len(tag.boxes)} box(es)")
            )
        for b in tag.boxes:
            for code in b.violations():
                violations.append(Violation(code, idx, f"box {b.as_tuple()}"))
        if tag.source_image is not None:
            if tag.source_image < 1:
                violations.append(Violation("OutOfRange", idx, f"source image index {tag.source_image}"))
            bound = subjects_by_source.setdefault(tag.source_image, tag.subject_phrase)
            if bound != tag.subject_phrase:
                violations.append(
                    Violation(
                        "ConflictingSource",
                        idx,
                        f"image{tag.source_image} bound to both '{bound}' and '{tag.subject_phrase}'",
                    )
                )
    text, ends = _render_spans(p)
    for idx, end in _ambiguous_sources(p, text, ends):
        violations.append(
            Violation("AmbiguousSource", idx, f"following text {text[end:end + 16]!r} reads as a source suffix")
        )
    return violations


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _parse_coordinate(raw: str, text: str, offset: int) -> Decimal:
    token = raw.strip()
    if not _NUMBER.match(token):
        raise MalformedTag(f"non-numeric coordinate {token!r}", _byte_offset(text, offset))
    try:
        value = Decimal(token)
    except InvalidOperation as e:
        raise MalformedTag(f"non-numeric coordinate {token!r}", _byte_offset(text, offset)) from e
    if not (0 <= value <= 1):
        raise OutOfRange(f"coordinate {token} outside [0, 1] (at byte offset {_byte_offset(text, offset)})")
    return value


def _parse_box(text: str, start: int) -> Tuple[BBox, int]:
    """Parse the tag opening at ``start``; returns the box and the index just past ``</bbox>``."""
    body_start = start + len(OPEN_TAG)
    close = text.find(CLOSE_TAG, body_start)
    reopen = text.find(OPEN_TAG, body_start)
    if close == -1 or (reopen != -1 and reopen < close):
        raise MalformedTag("unclosed <bbox> tag", _byte_offset(text, start))

    m = _BRACKETS.match(text[body_start:close])
    if m is None:
        raise MalformedTag("expected [x1,y1,x2,y2] inside <bbox>", _byte_offset(text, body_start))
    inner_start = body_start + m.start(1)
    parts = m.group(1).split(",")
    if len(parts) != 4:
        raise MalformedTag(f"expected 4 coordinates, got {len(parts)}", _byte_offset(text, inner_start))

    coords, pos = [], inner_start
    for part in parts:
        coords.append(_parse_coordinate(part, text, pos))
        pos += len(part) + 1

    box = BBox(*coords)
    if box.violations() == ["OutOfRange"]:
        raise OutOfRange(f"unordered corners {box.as_tuple()} (at byte offset {_byte_offset(text, start)})")
    return box.checked(), close + len(CLOSE_TAG)


def _split_subject(before: str) -> Tuple[str, str, int]:
    """
    Split the text preceding a tag into (plain text, subject phrase, count).

    The phrase is the longest run of up to ``MAX_PHRASE_WORDS`` single-space separated words
    directly before the tag that contains no function word; a preceding integer >= 2 is the count.
    """
    stripped = before.rstrip()
    end, phrase_start, n_words = len(stripped), None, 0
    while n_words < MAX_PHRASE_WORDS:
        m = _WORD_AT_END.search(stripped, 0, end)
        if m is None or m.group(0).lower() in FUNCTION_WORDS:
            break
        phrase_start, n_words = m.start(), n_words + 1
        if m.start() == 0 or stripped[m.start() - 1] != " ":
            break
        end = m.start() - 1

    if phrase_start is None:
        return before, "", 1

    phrase = stripped[phrase_start:]
    plain = stripped[:phrase_start]
    count = 1
    cm = _COUNT_AT_END.search(plain)
    if cm is not None and int(cm.group(1)) >= 2:
        count = int(cm.group(1))
        plain = plain[: cm.start(1)]
    return plain, phrase, count


def _iter_tag_groups(text: str) -> Iterator[Tuple[int, int, List[BBox], Optional[int]]]:
    """Yield ``(start, end, boxes, source_image)`` for every run of comma-separated tags."""
    pos = 0
    while True:
        start = text.find(OPEN_TAG, pos)
        if start == -1:
            return
        boxes = []
        box, end = _parse_box(text, start)
        boxes.append(box)
        while True:
            sep = _BOX_SEPARATOR.match(text, end)
            if sep is None:
                break
            box, end = _parse_box(text, sep.end())
            boxes.append(box)
        source = None
        suffix = _SOURCE_SUFFIX.match(text, end)
        if suffix is not None:
            source = int(suffix.group(1))
            end = suffix.end()
        yield start, end, boxes, source
        pos = end


def parse_prompt(text: str) -> LayoutPrompt:
    """
    Parse prompt text into plain spans and instance tags.

    Accepts whitespace inside brackets, ``from image N`` and untrimmed decimals such as ``0.200``.
    Raises ``MalformedTag`` (with byte offset) or ``OutOfRange``.

    Example:
        >>> p = parse_prompt("a brown sofa <bbox>[0.1,0.5,0.6,0.9]</bbox> in the room")
        >>> p.tags[0].subject_phrase
        'brown sofa'
    """
    parts: List[Union[str, InstanceTag]] = []
    pos = 0
    for start, end, boxes, source in _iter_tag_groups(text):
        plain, phrase, count = _split_subject(text[pos:start])
        parts.append(plain)
        parts.append(InstanceTag(phrase, count if phrase else 1, tuple(boxes), source))
        pos = end
    parts.append(text[pos:])
    return LayoutPrompt.from_parts(*parts)
