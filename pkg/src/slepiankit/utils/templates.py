from __future__ import annotations

from pathlib import Path
from typing import Any

import jinja2

TEMPLATE_DIR = Path(__file__).parent.parent / "templates"


def render_template(name: str, **context: Any) -> str:
    """Render one of the text templates shipped with the package

    Args:
        name: File name inside the ``templates`` directory
        **context: Variables available in the template
    """
    template_file = TEMPLATE_DIR / name
    assert template_file.is_file(), template_file
    with template_file.open() as f:
        template = jinja2.Template(
            f.read(),
            keep_trailing_newline=True,
            undefined=jinja2.StrictUndefined,
        )
    return template.render(**context)
