from .core import StageTracker, track_stage

__all__ = ["StageTracker", "track_stage"]
