"""Prompt rendering and model-output parsing shared by all adapter kinds.

Templates are plain text with single-brace slots like ``{question}``.
Doubled braces are literal text and are never rewritten, so rendering is a
pure substitution: the template survives byte-for-byte except for the slots.
"""

from __future__ import annotations

import re
from importlib import resources

from ..types import Verdict

ANSWER_MARKER = "[ANSWER]"
EXPAND_MARKER = "[Expand]"

_SLOT_RE = re.compile(r"(?<!\{)\{([a-z_][a-z0-9_]*)\}(?!\})")
_INT_LIST_RE = re.compile(r"\[\s*(?:-?\d+\s*(?:,\s*-?\d+\s*)*)?\]")


class PromptError(ValueError):
    """A template slot was left unfilled."""


class VerdictParseError(ValueError):
    """Model output contained neither an answer nor an expand marker."""


class SelectionParseError(ValueError):
    """Model output contained no well-formed integer list."""


def load_template(name: str) -> str:
    """Load a packaged prompt template by resource name (without .txt)."""
    return (resources.files("pyramem.adapters") / "prompts" / f"{name}.txt").read_text(
        encoding="utf-8")


def template_slots(template: str) -> set[str]:
    return set(_SLOT_RE.findall(template))


def render_prompt(template: str, slots: dict[str, object]) -> str:
    """Substitute every ``{slot}`` occurrence; no other text is touched."""
    missing = template_slots(template) - set(slots)
    if missing:
        raise PromptError(f"missing slot '{sorted(missing)[0]}'")
    out = template
    for name, value in slots.items():
        out = out.replace("{" + name + "}", str(value))
    return out


def parse_verdict(raw: str) -> Verdict:
    """Map raw model output to a verdict.

    The last marker in the text wins; everything after an answer marker is
    the (whitespace-trimmed) answer payload.
    """
    answer_at = raw.rfind(ANSWER_MARKER)
    expand_at = raw.rfind(EXPAND_MARKER)
    if answer_at < 0 and expand_at < 0:
        raise VerdictParseError(f"no verdict marker in {raw[:80]!r}")
    if answer_at > expand_at:
        payload = raw[answer_at + len(ANSWER_MARKER):].strip()
        if not payload:
            raise VerdictParseError("answer marker with empty payload")
        return Verdict.answer(payload)
    return Verdict.expand()


def parse_selection(raw: str, n_candidates: int) -> list[int]:
    """Extract the first integer list from raw output.

    Indices outside [0, n_candidates) are dropped; duplicates are removed
    preserving first occurrence.  An empty list is a valid selection.
    """
    if n_candidates < 0:
        raise ValueError("n_candidates must be >= 0")
    match = _INT_LIST_RE.search(raw)
    if match is None:
        raise SelectionParseError(f"no integer list in {raw[:80]!r}")
    body = match.group(0)[1:-1].strip()
    indices = [int(tok) for tok in body.split(",")] if body else []
    seen: set[int] = set()
    out: list[int] = []
    for i in indices:
        if 0 <= i < n_candidates and i not in seen:
            seen.add(i)
            out.append(i)
    return out
