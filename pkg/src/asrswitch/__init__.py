"""Per-utterance switching between enhanced speech and the observed mixture
as ASR input, driven by the score ``f = SIR - SNR``."""

__version__ = "0.1.0"

from .activity import ActivityTimeline, Label, VadConfig, detect_activity, join_timeline, overlap_ratio, timeline_from_stems
from .audio import AudioBuffer, MixtureBundle, MixtureSpec, gain_for_ratio, load_wav, mix, power, save_wav
from .errors import AsrError, DomainError, SwitchError
from .extraction import ClueRole, ExtractorKind, ExtractorSpec, SpeakerClue, extract
from .scoring import Provenance, SwitchScore, estimate_score, true_ratios, true_score
from .switching import CalibrationRecord, Choice, SwitchDecision, calibrate_lambda, decide, select_input
