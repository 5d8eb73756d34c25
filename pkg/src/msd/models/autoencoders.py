"""Per-frame autoencoder baselines: AE, VAE, beta-VAE and Sparse-AE."""

from __future__ import annotations

import numpy as np

from ..core import tensor as T
from ..core.rng import Rng, derive_seed
from ..core.tensor import Parameter, Tensor
from . import losses
from .base import SequenceModel
from .nn import MLP


class SequentialAE(SequenceModel):
    name = "ae"

    def __init__(self, manifest, hyper, seed=0, dtype=np.float32):
        super().__init__(manifest, hyper, seed, dtype)
        self.dim = int(self.hyper.get("latent_dim", 8))
        hidden = list(self.hyper.get("hidden_dims", [128]))
        act = self.hyper.get("activation", "relu")
        rng = Rng(derive_seed(self.seed, f"init/{self.name}"))
        self.encoder = MLP([self.frame_size, *hidden, self._enc_out()], rng, "encoder", act, "linear", self.dtype)
        self.decoder = MLP([self.dim, *hidden[::-1], self.frame_size], rng, "decoder", act, self.output_map, self.dtype)

    def _enc_out(self) -> int:
        return self.dim

    def parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + self.decoder.parameters()

    @property
    def code_dim(self) -> int:
        return self.dim

    def _frames(self, x) -> np.ndarray:
        return np.asarray(x, dtype=self.dtype).reshape(-1, self.frame_size)

    def _encode_graph(self, x: np.ndarray) -> Tensor:
        return T.reshape(self.encoder(Tensor(self._frames(x))), (len(x), self.seq_len, -1))

    def _decode_graph(self, z: Tensor) -> Tensor:
        n = z.shape[0]
        out = self.decoder(T.reshape(z, (n * self.seq_len, self.dim)))
        return T.reshape(out, (n, self.seq_len, *self.frame_shape))

    def encode(self, x):
        def run(b):
            out = self.encoder.forward_np(self._frames(b)).reshape(len(b), self.seq_len, -1)
            return out[..., : self.dim]

        return self._chunked(run, np.asarray(x))

    def decode(self, z):
        def run(b):
            out = self.decoder.forward_np(b.reshape(-1, self.dim))
            return out.reshape(len(b), self.seq_len, *self.frame_shape)

        return self._chunked(run, np.asarray(z, dtype=self.dtype))

    def loss_terms(self, x, rng):
        z = self._encode_graph(x)
        recon = losses.reconstruction(self._decode_graph(z), np.asarray(x, dtype=self.dtype))
        return recon, {"recon": recon.item()}


class SparseAE(SequentialAE):
    name = "sparse_ae"

    def loss_terms(self, x, rng):
        return self.sparse_loss(x, float(self.hyper.get("sparsity_weight", 0.01)))

    def sparse_loss(self, x, weight: float) -> tuple[Tensor, dict[str, float]]:
        z = self._encode_graph(x)
        recon = losses.reconstruction(self._decode_graph(z), np.asarray(x, dtype=self.dtype))
        sparse = losses.sparsity(z, weight)
        return recon + sparse, {"recon": recon.item(), "sparsity": sparse.item()}


class SequentialVAE(SequentialAE):
    """Encoder emits per-step mean and log-variance; codes are the means."""

    name = "vae"
    variational = True

    @property
    def beta(self) -> float:
        return 1.0

    def _enc_out(self) -> int:
        return 2 * self.dim

    def posterior(self, x) -> tuple[Tensor, Tensor]:
        stats = self._encode_graph(x)
        mu = T.getitem(stats, (Ellipsis, slice(0, self.dim)))
        logvar = T.getitem(stats, (Ellipsis, slice(self.dim, 2 * self.dim)))
        return mu, logvar

    def variational_loss(self, x, rng: Rng, beta: float) -> tuple[Tensor, dict[str, float]]:
        mu, logvar = self.posterior(x)
        eps = rng.normal_array(mu.shape).astype(self.dtype)
        z = mu + T.exp(logvar * 0.5) * eps
        recon = losses.reconstruction(self._decode_graph(z), np.asarray(x, dtype=self.dtype))
        kl = losses.gaussian_kl(mu, logvar)
        return recon + kl * beta, {"recon": recon.item(), "kl": kl.item()}

    def loss_terms(self, x, rng):
        return self.variational_loss(x, rng, self.beta)


class SequentialBetaVAE(SequentialVAE):
    name = "beta_vae"

    @property
    def beta(self) -> float:
        return float(self.hyper.get("beta", 4.0))


def vae_loss(x, model: SequentialVAE, rng: Rng) -> Tensor:
    return model.variational_loss(x, rng, 1.0)[0]


def beta_vae_loss(x, model: SequentialVAE, beta: float, rng: Rng) -> Tensor:
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return model.variational_loss(x, rng, beta)[0]


def sparse_ae_loss(x, model: SparseAE, weight: float) -> Tensor:
    if weight < 0:
        raise ValueError("sparsity weight must be non-negative")
    return model.sparse_loss(x, weight)[0]
