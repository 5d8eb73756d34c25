"""Judge built from one boosted-tree classifier per factor.

Video inputs go through a fixed featurizer that is insensitive to where the
glyph sits: colour statistics, low-frequency Fourier magnitudes of the
brightness mask, plus circular centroids and their wrapped per-step motion.
Time series are summarised by per-channel levels plus a least-squares fit of
the channel-mean series on a constant, a linear ramp and low harmonics.
"""

from __future__ import annotations

import numpy as np

from ..datasets.container import Dataset
from ..learners.gbt import GbtModel, GbtParams, gbt_fit
from .base import Judge, JudgeError

_FFT_BAND = 4


def _circular_centroid(mass: np.ndarray) -> np.ndarray:
    """Angle of the mass distribution along rows and columns of a torus, (..., 2)."""
    h, w = mass.shape[-2:]
    ar = np.exp(2j * np.pi * np.arange(h) / h)
    ac = np.exp(2j * np.pi * np.arange(w) / w)
    rows = (mass.sum(axis=-1) * ar).sum(axis=-1)
    cols = (mass.sum(axis=-2) * ac).sum(axis=-1)
    return np.stack([np.angle(rows), np.angle(cols)], axis=-1)


def frame_features(frames: np.ndarray) -> np.ndarray:
    """(..., C, H, W) -> (..., F) translation-invariant appearance features."""
    frames = np.asarray(frames, dtype=np.float64)
    h, w = frames.shape[-2:]
    means = frames.mean(axis=(-2, -1))
    peaks = frames.max(axis=(-2, -1))
    gray = frames.sum(axis=-3)
    mask = gray / np.maximum(gray.max(axis=(-2, -1), keepdims=True), 1e-12)
    spec = np.abs(np.fft.fft2(mask))[..., :_FFT_BAND, :_FFT_BAND] / (h * w)
    return np.concatenate([means, peaks, spec.reshape(*spec.shape[:-2], -1)], axis=-1)


def sequence_features(x: np.ndarray) -> np.ndarray:
    """N x T x C x H x W -> N x F features covering appearance, position and motion."""
    x = np.asarray(x, dtype=np.float64)
    n, t = x.shape[:2]
    h, w = x.shape[-2:]
    appearance = frame_features(x).mean(axis=1)
    gray = x.sum(axis=2)
    angles = _circular_centroid(gray)  # n x t x 2
    start = angles[:, 0]
    delta = np.angle(np.exp(1j * (angles[:, 1:] - angles[:, :-1])))
    delta_cells = delta * np.array([h, w]) / (2 * np.pi)
    return np.concatenate(
        [appearance, np.cos(start), np.sin(start), start, delta_cells.reshape(n, -1), np.abs(delta_cells).sum(axis=1)],
        axis=1,
    )


def series_features(x: np.ndarray, harmonics: int = 3) -> np.ndarray:
    """N x T x C -> N x F: channel levels, ramp slope, harmonic amplitudes and phases."""
    x = np.asarray(x, dtype=np.float64)
    n, t, _ = x.shape
    steps = np.arange(t) / t
    cols = [np.ones(t), steps]
    for k in range(1, harmonics + 1):
        cols += [np.sin(2 * np.pi * k * steps), np.cos(2 * np.pi * k * steps)]
    basis = np.stack(cols, axis=1)
    coef = np.linalg.lstsq(basis, x.mean(axis=2).T, rcond=None)[0].T  # n x (2 + 2h)
    sin_c, cos_c = coef[:, 2::2], coef[:, 3::2]
    amp = np.hypot(sin_c, cos_c)
    phase = np.arctan2(cos_c, sin_c)
    levels = x.mean(axis=1) - x.mean(axis=(1, 2))[:, None]
    return np.concatenate([x.mean(axis=1), levels, coef, amp, np.cos(phase), np.sin(phase)], axis=1)


class TrainedJudge(Judge):
    def __init__(self, manifest, seq_models: dict[str, GbtModel], frame_models: dict[str, GbtModel]):
        self.manifest = manifest
        self.seq_models = seq_models
        self.frame_models = frame_models

    def _featurize(self, x: np.ndarray) -> np.ndarray:
        if self.manifest.modality == "video":
            return sequence_features(x)
        return series_features(x)

    def judge_sequences(self, x: np.ndarray, factor: str) -> np.ndarray:
        return self.seq_models[factor].predict(self._featurize(x)).astype(np.int64)

    def judge_all(self, x: np.ndarray) -> np.ndarray:
        feats = self._featurize(x)
        return np.stack([self.seq_models[f].predict(feats) for f in self.manifest.factor_names], axis=1).astype(np.int64)

    def judge_frames(self, frames: np.ndarray, factor: str) -> np.ndarray:
        self._check_frame_factor(factor)
        return self.frame_models[factor].predict(frame_features(frames)).astype(np.int64)


def fit_trained_judge(dataset: Dataset, split: str = "train", params: GbtParams | None = None, frames_per_seq: int = 2) -> TrainedJudge:
    """One classifier per factor on the chosen split; frame classifiers for frame-visible factors."""
    x, y = dataset.subset(split)
    manifest = dataset.manifest
    judge = TrainedJudge(manifest, {}, {})
    feats = judge._featurize(x)
    for j, f in enumerate(manifest.factors):
        if len(np.unique(y[:, j])) < 2:
            raise JudgeError(f"factor {f.name!r} has a single label in the {split} split")
        judge.seq_models[f.name] = gbt_fit(feats, y[:, j], params)
    if manifest.modality == "video":
        t = x.shape[1]
        steps = np.linspace(0, t - 1, frames_per_seq).round().astype(int)
        frames = x[:, steps].reshape(-1, *x.shape[2:])
        frame_feats = frame_features(frames)
        for name in judge.frame_factors():
            j = manifest.factor_index(name)
            judge.frame_models[name] = gbt_fit(frame_feats, np.repeat(y[:, j], len(steps)), params)
    return judge
