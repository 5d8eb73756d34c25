"""TS-24: six-channel series built from additive seasonal, trend and offset terms."""

from __future__ import annotations

import numpy as np

from ..core.rng import Rng, key_seed
from .factors import FactorSpec

SEQ_LEN = 24
CHANNELS = 6
AMPLITUDES = (0.25, 0.5, 1.0, 1.5)
PHASES = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)
SLOPES = (-1.0, 0.0, 1.0)
FREQS = (1, 2, 3)
N_STATIONS = 5


def factor_specs() -> list[FactorSpec]:
    return [
        FactorSpec("regime", "static", tuple(f"amp{a:g}" for a in AMPLITUDES)),
        FactorSpec("season", "static", ("winter", "spring", "summer", "autumn")),
        FactorSpec("station", "static", tuple(f"station{i}" for i in range(N_STATIONS))),
        FactorSpec("trend", "dynamic", ("falling", "flat", "rising")),
        FactorSpec("frequency", "dynamic", tuple(f"freq{f}" for f in FREQS)),
    ]


def station_offsets(station: int) -> np.ndarray:
    """Per-channel offsets; stations differ in level and in the channel tilt."""
    c = np.arange(CHANNELS, dtype=np.float64)
    return 0.8 * (station - 2) + 0.15 * (station + 1) * (c - 2.5) / 2.5


def generate(config, seed: int = 0, noise: float = 0.05, amp_override: float | None = None) -> np.ndarray:
    """T x 6 float32 series for one configuration.

    The noise stream is keyed by every factor except the station, so two
    series that differ only in station differ by exactly the offset table.
    """
    regime, season, station, trend, freq = (int(v) for v in config)
    t = np.arange(SEQ_LEN, dtype=np.float64)[:, None]
    amp = AMPLITUDES[regime] if amp_override is None else amp_override
    wave = amp * np.sin(2.0 * np.pi * FREQS[freq] * t / SEQ_LEN + PHASES[season])
    trend_term = SLOPES[trend] * t / SEQ_LEN
    series = station_offsets(station)[None, :] + wave + trend_term
    if noise > 0:
        rng = Rng(key_seed(seed, regime, season, trend, freq))
        series = series + noise * rng.normal_array((SEQ_LEN, CHANNELS))
    return series.astype(np.float32)


def generate_all(states: np.ndarray, seed: int = 0, noise: float = 0.05) -> np.ndarray:
    return np.stack([generate(s, seed, noise) for s in states])
