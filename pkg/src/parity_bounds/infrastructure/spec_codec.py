"""JSON problem documents, JSON reports and CSV traces."""

import csv
import io
import json
from pathlib import Path
from typing import Any

import pydantic
import structlog

from parity_bounds.application.dtos import REPORT_SCHEMA, ProblemSpec
from parity_bounds.domain.exceptions import SpecParseError, ValidationError
from parity_bounds.domain.models import DecayTrace, Problem
from parity_bounds.domain.services import IProblemRepository

logger = structlog.get_logger(__name__)

CSV_DIGITS = 17


def parse_spec(text: str) -> ProblemSpec:
    """Parse and validate a problem document.

    The operator table is also checked against the family invariants, so a
    returned spec always converts to a valid problem.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error("Malformed problem document", line=e.lineno, column=e.colno, error=e.msg)
        raise SpecParseError(e.msg, line=e.lineno, column=e.colno) from e

    try:
        spec = ProblemSpec.model_validate(raw)
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        message = first["msg"].removeprefix("Value error, ")
        logger.error("Invalid problem document", location=location, error=message)
        raise ValidationError(f"{location}: {message}" if location else message) from e

    spec.to_problem()
    return spec


def serialize_spec(spec: ProblemSpec) -> str:
    """Inverse of ``parse_spec``; floats are written with round-trip precision."""
    return json.dumps(spec.model_dump(mode="json", by_alias=True, exclude_none=True), indent=2)


def load_spec(path: Path) -> ProblemSpec:
    """Read a problem document from disk."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"Cannot read problem document {path}: {e}") from e
    except UnicodeDecodeError as e:
        logger.error("Problem document is not UTF-8", path=str(path), position=e.start)
        raise ValidationError(
            f"Problem document {path} is not valid UTF-8 (byte {e.start}: {e.reason})"
        ) from e
    return parse_spec(text)


class JsonProblemRepository(IProblemRepository):
    """Problems stored as JSON documents on the local filesystem."""

    def load(self, path: Path) -> Problem:
        """Read, validate and convert the document at ``path``."""
        logger.info("Loading problem document", path=str(path))
        return load_spec(path).to_problem()


def render_report(document: dict[str, Any]) -> str:
    """JSON report with the schema version first."""
    return json.dumps({"schema": REPORT_SCHEMA, **document}, indent=2)


def _format_number(value: float) -> str:
    return format(value, f".{CSV_DIGITS}g")


def render_trace_csv(trace: DecayTrace) -> str:
    """``t,expectation,excess,itot_lb`` with one row per grid point."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(trace.header)
    for row in trace.to_rows():
        writer.writerow([_format_number(v) for v in row])
    return buffer.getvalue()
