"""Prompt template loading, placeholder substitution, and hash pinning."""

from __future__ import annotations

import hashlib
from importlib import resources
from pathlib import Path
from typing import NamedTuple


class PromptTemplate(NamedTuple):
    template_id: str
    text: str
    sha256: str


def load_template(template_id: str) -> PromptTemplate:
    """Load a template by id (packaged) or by filesystem path.

    Packaged ids map to ``prompts/<id>.txt``; an id containing a path
    separator or ending in ``.txt`` is treated as a file path, so callers
    can version their own templates on disk.
    """
    if "/" in template_id or template_id.endswith(".txt"):
        path = Path(template_id)
        text = path.read_text(encoding="utf-8")
    else:
        text = (
            resources.files("qafact")
            .joinpath(f"prompts/{template_id}.txt")
            .read_text(encoding="utf-8")
        )
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return PromptTemplate(template_id=template_id, text=text, sha256=digest)


def render_template(text: str, **slots: str) -> str:
    """Substitute ``{NAME}`` placeholders literally.

    Plain replacement, not str.format, so braces inside article text never
    need escaping.
    """
    out = text
    for name, value in slots.items():
        out = out.replace("{" + name + "}", value)
    return out
