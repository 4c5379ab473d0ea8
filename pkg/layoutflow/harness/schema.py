import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import jsonschema

from ..errors import DataError

__all__ = ["REPORT_SCHEMA_PATH", "load_report_schema", "validate_report"]

REPORT_SCHEMA_PATH = Path(__file__).parent.parent / "configs" / "schema" / "sweep_report.schema.json"


@lru_cache(maxsize=1)
def load_report_schema() -> Dict[str, Any]:
    return json.loads(REPORT_SCHEMA_PATH.read_text(encoding="utf-8"))


def validate_report(report: Dict[str, Any]) -> None:
    try:
        jsonschema.validate(instance=report, schema=load_report_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise DataError(f"sweep report does not match its schema at {where}: {e.message}") from e
