"""Judge interface shared by oracle, trained and remote judges.

Judges work on batches and return label indices into the factor's label
space. ``INVALID`` marks a sample the judge could not classify.
"""

from __future__ import annotations

import numpy as np

from ..datasets.factors import DatasetManifest

INVALID = -1


class JudgeError(RuntimeError):
    """A judge could not produce a label."""


class Judge:
    manifest: DatasetManifest

    def judge_sequences(self, x: np.ndarray, factor: str) -> np.ndarray:
        raise NotImplementedError

    def judge_frames(self, frames: np.ndarray, factor: str) -> np.ndarray:
        raise NotImplementedError

    def judge_all(self, x: np.ndarray) -> np.ndarray:
        """N x F label indices for every factor."""
        return np.stack([self.judge_sequences(x, f) for f in self.manifest.factor_names], axis=1)

    def frame_factors(self) -> list[str]:
        """Static factors that a single frame reveals (video datasets only)."""
        if self.manifest.modality != "video":
            return []
        return [f.name for f in self.manifest.factors if f.kind == "static" and f.frame_observable]

    def _check_frame_factor(self, factor: str) -> None:
        if factor not in self.frame_factors():
            raise JudgeError(f"factor {factor!r} cannot be judged from a single frame")
