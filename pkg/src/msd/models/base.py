"""The model contract used by training, latent exploration and the metrics.

Every model exposes its representation as *codes*: an N x T x C array of
channels. Swapping and resampling act on the channel axis, ``decode_codes``
maps codes back to data, and ``latent_vector`` aggregates codes over time
into the fixed-length vector used by predictors.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core.rng import Rng
from ..core.tensor import Parameter, Tensor
from ..datasets.factors import DatasetManifest

STATIC = "static"
DYNAMIC = "dynamic"
UNTYPED = "untyped"


def swap_channels(z_a: np.ndarray, z_b: np.ndarray, S: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Exchange channels ``S`` (last axis) between two code arrays."""
    S = np.asarray(sorted(set(int(s) for s in S)), dtype=np.int64)
    dim = z_a.shape[-1]
    if z_a.shape != z_b.shape:
        raise ValueError(f"code shapes differ: {z_a.shape} vs {z_b.shape}")
    if S.size and (S.min() < 0 or S.max() >= dim):
        raise IndexError(f"channel indices {S.tolist()} outside [0, {dim})")
    a, b = z_a.copy(), z_b.copy()
    if S.size:
        a[..., S] = z_b[..., S]
        b[..., S] = z_a[..., S]
    return a, b


class SequenceModel:
    name = "base"
    variational = False
    trainable = True

    def __init__(self, manifest: DatasetManifest, hyper: dict, seed: int = 0, dtype=np.float32):
        self.manifest = manifest
        self.hyper = dict(hyper)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.seq_len = manifest.seq_len
        self.frame_shape = tuple(manifest.step_shape)
        self.frame_size = int(np.prod(self.frame_shape))
        # a sigmoid output stalls on mostly-black frames; plain MSE on a linear map trains reliably
        self.output_map = "linear"
        self.bank: np.ndarray | None = None
        self.eval_chunk = 256

    # -- parameters --------------------------------------------------------
    def parameters(self) -> list[Parameter]:
        return []

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        return [(p.name, p) for p in self.parameters()]

    # -- training ----------------------------------------------------------
    def loss_terms(self, x: np.ndarray, rng: Rng) -> tuple[Tensor, dict[str, float]]:
        """Scalar training loss and its named components."""
        raise NotImplementedError

    def finalize(self, train_x: np.ndarray) -> None:
        """Post-training hook: store a bank of training codes for resampling."""
        self.bank = self.codes(train_x).astype(np.float32)

    def extra_state(self) -> dict[str, np.ndarray]:
        return {} if self.bank is None else {"bank": self.bank}

    def load_extra_state(self, arrays: dict[str, np.ndarray]) -> None:
        if "bank" in arrays:
            self.bank = arrays["bank"]

    # -- encode/decode -----------------------------------------------------
    def _chunked(self, fn, x: np.ndarray) -> np.ndarray:
        outs = [fn(x[s : s + self.eval_chunk]) for s in range(0, len(x), self.eval_chunk)]
        return np.concatenate(outs, axis=0) if outs else fn(x)

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Per-step latents Z, N x T x d."""
        raise NotImplementedError

    def decode(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def codes(self, x: np.ndarray) -> np.ndarray:
        return self.encode(x)

    def code_flags(self, x: np.ndarray) -> np.ndarray:
        """True where a sample's codes are trustworthy (always, unless overridden)."""
        return np.ones(len(x), dtype=bool)

    def decode_codes(self, c: np.ndarray) -> np.ndarray:
        return self.decode(c)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.decode_codes(self.codes(x))

    @property
    def code_dim(self) -> int:
        raise NotImplementedError

    @property
    def latent_dim(self) -> int:
        return self.code_dim

    def channel_roles(self) -> list[str]:
        return [UNTYPED] * self.code_dim

    def latent_vector(self, x: np.ndarray, flatten: bool = False) -> np.ndarray:
        """Fixed-length vector per sample: time mean of the codes, or the flattened code sequence."""
        c = self.codes(x)
        if flatten:
            return c.reshape(len(c), -1)
        return c.mean(axis=1)

    # -- resampling --------------------------------------------------------
    def sample_latent(self, S: Sequence[int], n: int, seed: int) -> np.ndarray:
        """Values for channels ``S``: N x T x |S|.

        Variational models draw standard normals; deterministic models copy
        the channels from randomly chosen training codes.
        """
        S = np.asarray(list(S), dtype=np.int64)
        rng = Rng(seed)
        if self.variational:
            return rng.normal_array((n, self.seq_len, len(S))).astype(np.float32)
        if self.bank is None or len(self.bank) == 0:
            raise ValueError("model has no latent bank to sample from")
        picks = rng.choice(len(self.bank), n)
        return self.bank[picks][:, :, S]

    def describe(self) -> dict:
        return {"name": self.name, "code_dim": self.code_dim, "roles": self.channel_roles()}
