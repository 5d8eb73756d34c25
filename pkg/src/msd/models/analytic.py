"""A perfectly disentangled reference model built from the generator itself.

Channel ``i`` holds factor ``i``'s label index at every step. Encoding finds
the nearest enumerated state; decoding rounds each channel's time mean to a
label and renders that state. It has no parameters and is used to validate
exploration and the metrics end to end.
"""

from __future__ import annotations

import numpy as np

from ..datasets.generate import enumerate_for
from ..judges.oracle import OracleJudge
from .base import DYNAMIC, STATIC, SequenceModel


class GroundTruthModel(SequenceModel):
    name = "analytic"
    trainable = False

    def __init__(self, manifest, hyper=None, seed=0, dtype=np.float32, enumeration=None):
        super().__init__(manifest, hyper or {}, seed, dtype)
        data, states = enumeration if enumeration is not None else enumerate_for(manifest)
        self.data = np.asarray(data, dtype=np.float32)
        self.cards = np.array([f.cardinality for f in manifest.factors], dtype=np.int64)
        # mixed-radix place values, last factor fastest
        self.radix = np.concatenate([np.cumprod(self.cards[::-1])[::-1][1:], [1]]).astype(np.int64)
        states = np.asarray(states, dtype=np.int64)
        self.lookup = np.full(int(np.prod(self.cards)), -1, dtype=np.int64)
        self.lookup[states @ self.radix] = np.arange(len(states))
        self._oracle = OracleJudge(manifest, (self.data, states))

    def loss_terms(self, x, rng):
        raise TypeError("the ground-truth model has nothing to train")

    @property
    def code_dim(self) -> int:
        return len(self.cards)

    def channel_roles(self):
        return [STATIC if f.kind == "static" else DYNAMIC for f in self.manifest.factors]

    def labels_of(self, x) -> np.ndarray:
        return self._oracle.judge_all(np.asarray(x))

    def encode(self, x):
        labels = self.labels_of(x).astype(np.float32)
        return np.repeat(labels[:, None, :], self.seq_len, axis=1)

    def decode(self, z):
        z = np.asarray(z, dtype=np.float64)
        labels = np.clip(np.rint(z.mean(axis=1)), 0, self.cards - 1).astype(np.int64)
        rows = self.lookup[labels @ self.radix]
        if (rows < 0).any():
            raise ValueError("decoded a state missing from the enumeration")
        return self.data[rows].copy()
