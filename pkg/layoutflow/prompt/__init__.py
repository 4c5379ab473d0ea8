from .bbox import BBox, normalize_box, format_box, format_coord, round3
from .grammar import (
    InstanceTag,
    PlainText,
    Tagged,
    LayoutPrompt,
    Violation,
    serialize_prompt,
    parse_prompt,
    strip_coordinates,
    validate,
    canonicalize_t2i,
)
from .layout_json import LayoutDocument, load_layout, dump_layout, layout_to_prompt, prompt_to_layout
