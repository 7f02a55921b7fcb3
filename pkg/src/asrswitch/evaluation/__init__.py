from .asr import AsrHook, Normalizer, run_asr
from .cer import cer, edit_distance
from .grid import GridCell, GridReport, Utterance, read_grid_manifest, run_grid

__all__ = [
    "AsrHook", "Normalizer", "run_asr", "cer", "edit_distance",
    "GridCell", "GridReport", "Utterance", "read_grid_manifest", "run_grid",
]
