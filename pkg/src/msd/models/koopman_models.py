"""Koopman autoencoders: batch-level SKD and the per-instance single-static-mode variant."""

from __future__ import annotations

import numpy as np

from ..core.tensor import Parameter
from ..linalg import koopman as kp
from ..linalg.eig import inverse
from . import losses
from .autoencoders import SequentialAE
from .base import DYNAMIC, STATIC


class _KoopmanAE(SequentialAE):
    """Shared encoder/decoder plumbing; latents live in R^K per step."""

    def __init__(self, manifest, hyper, seed=0, dtype=np.float32):
        given = dict(hyper)
        hyper = dict(hyper)
        hyper.setdefault("k_dim", 16)
        hyper["latent_dim"] = int(hyper["k_dim"])
        hyper["hidden_dims"] = [int(hyper.get("hidden_dim", 128))]
        super().__init__(manifest, hyper, seed, dtype)
        self.hyper = given
        self.k = int(hyper["k_dim"])
        self.cfg = kp.SpectralConfig(
            k_dim=self.k,
            static_size=int(hyper.get("static_size", 1)),
            static_mode=hyper.get("static_mode", "ball"),
            dynamic_thresh=float(hyper.get("dynamic_thresh", 0.25)),
            w_rec=float(hyper.get("w_rec", 1.0)),
            w_pred=float(hyper.get("w_pred", 1.0)),
            w_eigs=float(hyper.get("w_eigs", 1.0)),
        )

    def parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + self.decoder.parameters()

    def _compose(self, x, K_op):
        cfg = self.cfg
        z = self._encode_graph(x)
        recon = losses.reconstruction(self._decode_graph(z), np.asarray(x, dtype=self.dtype))
        K = K_op(z)
        pred = losses.prediction(z, K)
        spec, decomps = kp.spectral_loss_op(K, cfg)
        total = recon * cfg.w_rec + pred * cfg.w_pred + spec * cfg.w_eigs
        gaps = [np.abs(d.eigenvalues[d.subset(STATIC)] - 1.0).max() for d in decomps]
        terms = {"recon": recon.item(), "pred": pred.item(), "spectral": spec.item(), "static_gap": float(np.mean(gaps))}
        return total, terms


class SKD(_KoopmanAE):
    """One Koopman matrix per batch; codes are latents expressed in the eigenbasis of a
    reference matrix fitted on the training split."""

    name = "skd"

    def __init__(self, manifest, hyper, seed=0, dtype=np.float32):
        hyper = dict(hyper)
        hyper.setdefault("static_size", 4)
        super().__init__(manifest, hyper, seed, dtype)
        self.basis: np.ndarray | None = None
        self.basis_inv: np.ndarray | None = None
        self.roles: list[str] | None = None
        self.ill_conditioned = False

    def loss_terms(self, x, rng):
        return self._compose(x, kp.fit_batch_op)

    def finalize(self, train_x):
        Z = self.encode(train_x)
        self.set_reference(kp.fit_batch(Z))
        super().finalize(train_x)

    def set_reference(self, K: np.ndarray) -> None:
        dec = kp.decompose(K, self.cfg)
        V = dec.eigen.vectors
        basis = np.empty((self.k, self.k), dtype=np.float64)
        for j in range(self.k):
            p = int(dec.eigen.partner[j])
            if p == j:
                basis[:, j] = V[:, j].real
            elif dec.eigenvalues[j].imag > 0:
                basis[:, j] = V[:, j].real
                basis[:, p] = V[:, j].imag
        self.ill_conditioned = bool(dec.eigen.ill_conditioned)
        try:
            inv = inverse(basis).real
            cond = np.abs(basis).sum(axis=0).max() * np.abs(inv).sum(axis=0).max()
            self.ill_conditioned |= not cond <= 1e12
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(basis)
            self.ill_conditioned = True
        self.basis, self.basis_inv = basis, inv
        self.roles = list(dec.mode_labels)
        self.reference = dec

    def _need_basis(self):
        if self.basis is None:
            raise RuntimeError("SKD codes need a reference Koopman basis; call finalize() after training")

    def codes(self, x):
        self._need_basis()
        return (self.encode(x).astype(np.float64) @ self.basis).astype(np.float32)

    def code_flags(self, x):
        return np.full(len(x), not self.ill_conditioned)

    def decode_codes(self, c):
        self._need_basis()
        return self.decode((np.asarray(c, dtype=np.float64) @ self.basis_inv).astype(self.dtype))

    def channel_roles(self):
        return list(self.roles) if self.roles is not None else super().channel_roles()

    def extra_state(self):
        state = super().extra_state()
        if self.basis is not None:
            state["reference_matrix"] = self.reference.matrix
        return state

    def load_extra_state(self, arrays):
        super().load_extra_state(arrays)
        if "reference_matrix" in arrays:
            self.set_reference(arrays["reference_matrix"].astype(np.float64))


class SSMSKD(_KoopmanAE):
    """Per-sequence Koopman matrices with exactly one static unit each.

    Codes are the static and dynamic spectral projections of each sequence's
    latents, K channels each; decoding sums the two halves.
    """

    name = "ssm_skd"

    def __init__(self, manifest, hyper, seed=0, dtype=np.float32):
        hyper = dict(hyper)
        if int(hyper.get("static_size", 1)) != 1:
            raise ValueError("the single-static-mode model requires static_size = 1")
        hyper["static_size"] = 1
        super().__init__(manifest, hyper, seed, dtype)

    def loss_terms(self, x, rng):
        return self._compose(x, kp.fit_instances_op)

    @property
    def code_dim(self) -> int:
        return 2 * self.k

    @property
    def latent_dim(self) -> int:
        return 2 * self.k

    def channel_roles(self):
        return [STATIC] * self.k + [DYNAMIC] * self.k

    def _split(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Z = np.asarray(Z, dtype=np.float64)
        mats = kp.fit_instances(Z)
        codes = np.empty((len(Z), Z.shape[1], 2 * self.k), dtype=np.float64)
        ok = np.ones(len(Z), dtype=bool)
        for i, (z, m) in enumerate(zip(Z, mats)):
            dec = kp.decompose(m, self.cfg)
            try:
                static = kp.project_modes(z, dec.eigen, dec.subset(STATIC))
                codes[i, :, : self.k] = static
                codes[i, :, self.k :] = z - static
                ok[i] = not dec.eigen.ill_conditioned
            except (ValueError, np.linalg.LinAlgError):
                codes[i, :, : self.k] = z
                codes[i, :, self.k :] = 0.0
                ok[i] = False
        return codes.astype(np.float32), ok

    def decompose_instances(self, x) -> list[kp.KoopmanDecomposition]:
        Z = self.encode(x)
        return [kp.decompose(m, self.cfg) for m in kp.fit_instances(Z)]

    def codes(self, x):
        return self._chunked(lambda b: self._split(self.encode(b))[0], np.asarray(x))

    def code_flags(self, x):
        return self._chunked(lambda b: self._split(self.encode(b))[1], np.asarray(x))

    def codes_from_latents(self, Z: np.ndarray) -> np.ndarray:
        return self._split(Z)[0]

    def decode_codes(self, c):
        c = np.asarray(c, dtype=np.float32)
        return self.decode(c[..., : self.k] + c[..., self.k :])
