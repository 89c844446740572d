"""Hopfield VAE: encoder and decoder CHNs trained with equilibrium propagation.

Variants
--------
``H``    layered encoder ``image -> hidden -> [mu; logvar]`` and layered decoder
         ``z -> hidden -> image``.
``DH``   same partitions, every pair of neurons connected.
``TDH``  one dense network ``image | hidden | mu`` used in both directions; the
         encoder clamps the image and reads mu, the decoder clamps z on the mu
         partition and reads the image. The posterior scale is a fixed sigma.

The backprop-trained feed-forward baseline lives in :mod:`epvae.fvae`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .chn import (DENSE, LAYERED, ChnParams, NumericalDivergenceError, build_topology,
                  init_params)
from .data import batches
from .ep import (EpConfig, PhasePair, apply_sgd, free_phase, input_gradient, run_phases,
                 weight_gradient)

CHN_VARIANTS = ("H", "DH", "TDH")


class TrainingDivergenceError(FloatingPointError):
    def __init__(self, sample_idx, phase, cause):
        super().__init__(f"settling diverged for batch sample(s) {list(sample_idx)} "
                         f"during {phase}: {cause}")
        self.sample_idx = sample_idx
        self.phase = phase


@dataclass(frozen=True, eq=False)
class VaeModel:
    variant: str
    encoder: ChnParams
    decoder: ChnParams
    image_dim: int
    latent_dim: int
    beta_kl: float
    fixed_sigma: float | None = None
    ep: EpConfig = field(default_factory=EpConfig)

    def __post_init__(self):
        if self.variant not in CHN_VARIANTS:
            raise ValueError(f"unknown CHN variant {self.variant!r}")
        if self.beta_kl <= 0:
            raise ValueError("beta_kl must be positive")
        enc_out = self.encoder.mask.n_out
        if self.tied:
            if self.encoder is not self.decoder:
                raise ValueError("TDH encoder and decoder must be the same ChnParams object")
            if self.fixed_sigma is None or self.fixed_sigma <= 0:
                raise ValueError("TDH needs a positive fixed_sigma")
            if enc_out != self.latent_dim:
                raise ValueError("TDH encoder output must have latent_dim neurons")
        elif enc_out != 2 * self.latent_dim:
            raise ValueError("encoder output must hold [mu; logvar] (2 * latent_dim neurons)")

    @property
    def tied(self):
        return self.variant == "TDH"

    def encoder_io(self):
        m = self.encoder.mask
        return m.input_idx, m.output_idx

    def decoder_io(self):
        if self.tied:
            m = self.encoder.mask
            return m.output_idx, m.input_idx
        m = self.decoder.mask
        return m.input_idx, m.output_idx

    def with_params(self, encoder, decoder=None):
        return replace(self, encoder=encoder, decoder=encoder if self.tied else decoder)


def build_vae(variant, image_dim, hidden, latent_dim, beta_kl, fixed_sigma=None,
              seed=0, ep: EpConfig | None = None) -> VaeModel:
    ep = ep or EpConfig()
    if variant == "TDH":
        params = init_params(build_topology(DENSE, image_dim, hidden, latent_dim), seed)
        return VaeModel(variant, params, params, image_dim, latent_dim, beta_kl,
                        fixed_sigma, ep)
    if variant not in ("H", "DH"):
        raise ValueError(f"unknown CHN variant {variant!r}")
    kind = LAYERED if variant == "H" else DENSE
    enc = init_params(build_topology(kind, image_dim, hidden, 2 * latent_dim), seed)
    dec = init_params(build_topology(kind, latent_dim, hidden, image_dim), seed + 1)
    return VaeModel(variant, enc, dec, image_dim, latent_dim, beta_kl, None, ep)


# ---------------------------------------------------------------------------
# closed-form losses and gradients


def recon_loss(x_hat, x):
    d = np.asarray(x_hat) - np.asarray(x)
    return 0.5 * np.sum(d * d, axis=-1)


def recon_loss_grad(x_hat, x):
    return np.asarray(x_hat, dtype=np.float64) - np.asarray(x, dtype=np.float64)


def kl_loss(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dimensions."""
    mu, logvar = np.asarray(mu, dtype=np.float64), np.asarray(logvar, dtype=np.float64)
    return 0.5 * np.sum(-logvar - 1.0 + np.exp(logvar) + mu * mu, axis=-1)


def kl_grads(mu, logvar):
    mu, logvar = np.asarray(mu, dtype=np.float64), np.asarray(logvar, dtype=np.float64)
    return mu.copy(), 0.5 * (np.exp(logvar) - 1.0)


@dataclass
class LatentSample:
    mu: np.ndarray
    logvar: np.ndarray
    epsilon: np.ndarray
    z: np.ndarray


def reparameterize(mu, logvar, seed=None, epsilon=None) -> LatentSample:
    """z = mu + eps * exp(logvar / 2); ``epsilon`` overrides the draw from ``seed``."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.broadcast_to(np.asarray(logvar, dtype=np.float64), mu.shape)
    if mu.shape != logvar.shape:
        raise ValueError("mu and logvar must have equal shapes")
    if epsilon is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        epsilon = rng.standard_normal(mu.shape)
    epsilon = np.asarray(epsilon, dtype=np.float64)
    return LatentSample(mu, logvar, epsilon, mu + epsilon * np.exp(0.5 * logvar))


def encoder_loss_grads(grad_z, sample: LatentSample, tied=False):
    """Map dL/dz back to (dL/dmu, dL/dlogvar); ``grad_logvar`` is None when tied."""
    grad_z = np.asarray(grad_z, dtype=np.float64)
    if tied:
        return grad_z.copy(), None
    return grad_z.copy(), 0.5 * np.exp(0.5 * sample.logvar) * sample.epsilon * grad_z


# ---------------------------------------------------------------------------
# inference


def _split_latent(model, y):
    L = model.latent_dim
    if model.tied:
        return y, np.full_like(y, 2.0 * np.log(model.fixed_sigma))
    return y[..., :L], y[..., L:]


def encode_state(model: VaeModel, x):
    clamp, _ = model.encoder_io()
    return free_phase(model.encoder, x, model.ep, clamp)


def encode(model: VaeModel, x):
    """Encoder free phase; returns ``(mu, logvar)``."""
    _, read = model.encoder_io()
    s = encode_state(model, x)
    return _split_latent(model, s.s[..., read])


def decode_state(model: VaeModel, z):
    clamp, _ = model.decoder_io()
    return free_phase(model.decoder, z, model.ep, clamp)


def decode(model: VaeModel, z):
    """Decoder free phase with z clamped; the raw image-neuron states are the output."""
    _, read = model.decoder_io()
    return decode_state(model, z).s[..., read]


def reconstruct(model: VaeModel, x):
    """Deterministic reconstruction through the posterior mean."""
    mu, _ = encode(model, x)
    return decode(model, mu)


def generate(model: VaeModel, n: int, seed):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n, model.latent_dim))
    return decode(model, z)


# ---------------------------------------------------------------------------
# training


@dataclass
class StepGradients:
    encoder_grad: np.ndarray
    decoder_grad: np.ndarray
    grad_z: np.ndarray
    grad_mu: np.ndarray
    grad_logvar: np.ndarray | None
    sample: LatentSample
    encoder_pair: PhasePair
    decoder_pair: PhasePair
    metrics: dict


def _output_grad_fn(read_idx, fn):
    read_idx = np.asarray(read_idx)

    def loss_grad(s):
        g = np.zeros_like(s)
        g[..., read_idx] = fn(s[..., read_idx])
        return g
    return loss_grad


def _guard(phase, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NumericalDivergenceError as exc:
        rows = exc.rows if exc.rows is not None else []
        raise TrainingDivergenceError(rows, phase, exc) from exc


def ep_step_gradients(model: VaeModel, images, seed=None, epsilon=None) -> StepGradients:
    """EP gradient estimates for one batch (weight gradients are batch means).

    One epsilon draw per sample forms z; that z stays clamped on the decoder
    through all three decoder phases and the same epsilon maps dL/dz onto the
    encoder outputs.
    """
    x = np.atleast_2d(np.asarray(images, dtype=np.float64))
    if len(x) == 0:
        raise ValueError("empty batch")
    beta, bkl = model.ep.beta, model.beta_kl
    enc_clamp, enc_read = model.encoder_io()
    dec_clamp, dec_read = model.decoder_io()

    enc_free = _guard("encoder free phase", free_phase, model.encoder, x, model.ep, enc_clamp)
    mu, logvar = _split_latent(model, enc_free.s[..., enc_read])
    sample = reparameterize(mu, logvar, seed, epsilon)

    dec_loss_grad = _output_grad_fn(dec_read, lambda y: recon_loss_grad(y, x))
    dec_pair = _guard("decoder phases", run_phases, model.decoder, sample.z,
                      dec_loss_grad, model.ep, dec_clamp)
    dec_grad = weight_gradient(dec_pair, model.decoder, beta)
    grad_z = input_gradient(dec_pair, model.decoder, beta, dec_clamp)
    grad_mu, grad_logvar = encoder_loss_grads(grad_z, sample, model.tied)

    L = model.latent_dim
    if model.tied:
        def enc_out_grad(y):
            return grad_mu + bkl * y
    else:
        def enc_out_grad(y):
            g_mu, g_lv = kl_grads(y[..., :L], y[..., L:])
            return np.concatenate([grad_mu + bkl * g_mu, grad_logvar + bkl * g_lv], axis=-1)
    enc_pair = _guard("encoder nudged phases", run_phases, model.encoder, x,
                      _output_grad_fn(enc_read, enc_out_grad), model.ep, enc_clamp,
                      s_free=enc_free)
    enc_grad = weight_gradient(enc_pair, model.encoder, beta)

    sse = recon_loss(dec_pair.s_free.s[..., dec_read], x)
    kl = kl_loss(mu, logvar)
    metrics = {"sse": float(np.mean(sse)), "kl": float(np.mean(kl)),
               "total": float(np.mean(sse + bkl * kl))}
    return StepGradients(enc_grad, dec_grad, grad_z, grad_mu, grad_logvar, sample,
                         enc_pair, dec_pair, metrics)


def apply_gradients(model: VaeModel, grads: StepGradients, lr: float) -> VaeModel:
    if model.tied:
        return model.with_params(apply_sgd(model.encoder, grads.encoder_grad + grads.decoder_grad, lr))
    return model.with_params(apply_sgd(model.encoder, grads.encoder_grad, lr),
                             apply_sgd(model.decoder, grads.decoder_grad, lr))


def train_step(model: VaeModel, images, seed, lr: float):
    """One EP update on a batch. Returns ``(model, metrics)``; metrics are
    measured at the free equilibria before the update."""
    grads = ep_step_gradients(model, images, seed)
    return apply_gradients(model, grads, lr), grads.metrics


def fit(model: VaeModel, images, epochs: int, batch_size: int, lr: float, seed: int,
        on_epoch=None):
    """Plain SGD over shuffled batches. Returns ``(model, history)`` where history
    holds per-epoch means of the step metrics."""
    history = []
    for epoch in range(epochs):
        rows = []
        for b, idx in enumerate(batches(len(images), batch_size, seed, epoch)):
            step_seed = np.random.default_rng([seed, epoch, b, 1])
            model, m = train_step(model, images[idx], step_seed, lr)
            rows.append((len(idx), m))
        n = sum(k for k, _ in rows)
        summary = {"epoch": epoch + 1}
        for key in ("sse", "kl", "total"):
            summary[key] = sum(k * m[key] for k, m in rows) / n
        history.append(summary)
        if on_epoch is not None:
            on_epoch(model, summary)
    return model, history
