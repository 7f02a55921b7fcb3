"""Exception types carrying a short, stable error tag.

The tag is what batch drivers record per row and what the CLI prints, so it
is part of the public surface (e.g. ``"silent source"``, ``"rate mismatch"``).
"""

from __future__ import annotations


class SwitchError(Exception):
    """Base class; ``tag`` identifies the failure kind."""

    def __init__(self, tag: str, detail: str | None = None):
        self.tag = tag
        self.detail = detail
        super().__init__(f"{tag}: {detail}" if detail else tag)


class DomainError(SwitchError, ValueError):
    """Invalid input or a degenerate signal condition."""


class AsrError(SwitchError, RuntimeError):
    """The external recognizer failed or timed out."""
