"""Run an external recognizer as a subprocess on a temporary WAV file."""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from enum import Enum

from ..audio import AudioBuffer, save_wav
from ..errors import AsrError, DomainError

AUDIO_PLACEHOLDER = "{audio}"


class Normalizer(str, Enum):
    NONE = "none"
    STRIP_WHITESPACE = "strip_whitespace"


@dataclass(frozen=True)
class AsrHook:
    """``command_template`` is split shell-style; ``{audio}`` is replaced by the WAV path."""

    command_template: str
    timeout_s: float = 60.0
    transcript_normalizer: Normalizer = Normalizer.STRIP_WHITESPACE
    wav_format: str = "pcm16"

    def __post_init__(self):
        object.__setattr__(self, "transcript_normalizer", Normalizer(self.transcript_normalizer))
        if self.command_template.count(AUDIO_PLACEHOLDER) != 1:
            raise DomainError("invalid asr hook", f"template must contain {AUDIO_PLACEHOLDER} exactly once")
        if not self.timeout_s > 0:
            raise DomainError("invalid asr hook", "timeout_s must be positive")

    def argv(self, audio_path: str) -> list[str]:
        return [part.replace(AUDIO_PLACEHOLDER, audio_path) for part in shlex.split(self.command_template)]


def normalize_transcript(text: str, normalizer: Normalizer) -> str:
    if normalizer is Normalizer.STRIP_WHITESPACE:
        return text.strip()
    return text


def run_asr(hook: AsrHook, audio: AudioBuffer, workdir: str | os.PathLike | None = None) -> str:
    """Transcribe ``audio`` with the hook's command and return its normalized stdout."""
    fd, path = tempfile.mkstemp(suffix=".wav", dir=workdir)
    os.close(fd)
    try:
        save_wav(audio, path, hook.wav_format)
        try:
            proc = subprocess.run(hook.argv(path), capture_output=True, text=True, timeout=hook.timeout_s)
        except subprocess.TimeoutExpired:
            raise AsrError("asr timeout", f"no result after {hook.timeout_s} s") from None
        except OSError as exc:
            raise AsrError("asr failed", str(exc)) from exc
        if proc.returncode != 0:
            raise AsrError("asr failed", f"exit {proc.returncode}: {proc.stderr.strip()[:200]}")
        return normalize_transcript(proc.stdout, hook.transcript_normalizer)
    finally:
        os.unlink(path)
