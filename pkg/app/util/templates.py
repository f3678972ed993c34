# pyright: reportUnknownMemberType=false

from pathlib import Path
from typing import Any

from jinja2 import Environment, PackageLoader, StrictUndefined

templates = Environment(
    loader=PackageLoader("app", "templates"),
    autoescape=True,
    trim_blocks=True,
    lstrip_blocks=True,
    undefined=StrictUndefined,
    keep_trailing_newline=True,
)


def _fixed(val: float, digits: int = 4) -> str:
    return f"{val:.{digits}f}"


def _signed(val: float, digits: int = 4) -> str:
    return f"{val:+.{digits}f}"


def _px(val: float) -> str:
    return f"{val:.2f}"


templates.filters["fixed"] = _fixed
templates.filters["signed"] = _signed
templates.filters["px"] = _px


def render_svg(name: str, path: Path, context: dict[str, Any]) -> Path:  # pyright: ignore[reportExplicitAny]
    path.write_text(templates.get_template(name).render(**context))
    return path
