"""Feed-forward VAE baseline trained with backprop.

Encoder ``x -> sigmoid hidden -> [mu; logvar]``, decoder
``z -> sigmoid hidden -> tanh image``. Loss per sample is
SSE + beta_kl * KL; batch losses and gradients are means over the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import batches
from .vae import kl_grads, kl_loss, recon_loss, reparameterize

PARAM_NAMES = ("enc_W1", "enc_b1", "enc_W2", "enc_b2", "dec_W1", "dec_b1", "dec_W2", "dec_b2")


@dataclass(frozen=True, eq=False)
class FVaeModel:
    params: dict = field(repr=False)
    image_dim: int
    hidden: int
    latent_dim: int
    beta_kl: float
    variant: str = "F"


def _glorot(rng, fan_out, fan_in):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


def build_fvae(image_dim, hidden, latent_dim, beta_kl, seed=0) -> FVaeModel:
    rng = np.random.default_rng(seed)
    p = {
        "enc_W1": _glorot(rng, hidden, image_dim), "enc_b1": np.zeros(hidden),
        "enc_W2": _glorot(rng, 2 * latent_dim, hidden), "enc_b2": np.zeros(2 * latent_dim),
        "dec_W1": _glorot(rng, hidden, latent_dim), "dec_b1": np.zeros(hidden),
        "dec_W2": _glorot(rng, image_dim, hidden), "dec_b2": np.zeros(image_dim),
    }
    return FVaeModel(p, image_dim, hidden, latent_dim, beta_kl)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def encode(model: FVaeModel, x):
    p, L = model.params, model.latent_dim
    h = _sigmoid(np.atleast_2d(x) @ p["enc_W1"].T + p["enc_b1"])
    out = h @ p["enc_W2"].T + p["enc_b2"]
    return out[:, :L], out[:, L:]


def decode(model: FVaeModel, z):
    p = model.params
    h = _sigmoid(np.atleast_2d(z) @ p["dec_W1"].T + p["dec_b1"])
    return np.tanh(h @ p["dec_W2"].T + p["dec_b2"])


def fvae_forward(model: FVaeModel, x, seed=None, epsilon=None):
    """Returns ``(x_hat, cache)``; ``cache`` holds everything the backward pass needs."""
    p, L = model.params, model.latent_dim
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    h1 = _sigmoid(x @ p["enc_W1"].T + p["enc_b1"])
    out = h1 @ p["enc_W2"].T + p["enc_b2"]
    sample = reparameterize(out[:, :L], out[:, L:], seed, epsilon)
    h2 = _sigmoid(sample.z @ p["dec_W1"].T + p["dec_b1"])
    x_hat = np.tanh(h2 @ p["dec_W2"].T + p["dec_b2"])
    return x_hat, {"x": x, "h1": h1, "sample": sample, "h2": h2, "x_hat": x_hat}


def fvae_loss(model: FVaeModel, cache, x=None):
    x = cache["x"] if x is None else np.atleast_2d(x)
    s = cache["sample"]
    sse = recon_loss(cache["x_hat"], x)
    kl = kl_loss(s.mu, s.logvar)
    return {"sse": float(np.mean(sse)), "kl": float(np.mean(kl)),
            "total": float(np.mean(sse + model.beta_kl * kl))}


def fvae_backward(model: FVaeModel, cache, x=None) -> dict:
    """Exact gradients of the batch-mean SSE + beta_kl * KL, epsilon held fixed."""
    p = model.params
    x = cache["x"] if x is None else np.atleast_2d(x)
    B = len(x)
    h1, h2, s, x_hat = cache["h1"], cache["h2"], cache["sample"], cache["x_hat"]

    d_out2 = (x_hat - x) * (1.0 - x_hat ** 2) / B
    g = {"dec_W2": d_out2.T @ h2, "dec_b2": d_out2.sum(0)}
    d_a2 = (d_out2 @ p["dec_W2"]) * h2 * (1.0 - h2)
    g["dec_W1"] = d_a2.T @ s.z
    g["dec_b1"] = d_a2.sum(0)
    d_z = d_a2 @ p["dec_W1"]

    kmu, klv = kl_grads(s.mu, s.logvar)
    d_mu = d_z + model.beta_kl * kmu / B
    d_lv = d_z * s.epsilon * 0.5 * np.exp(0.5 * s.logvar) + model.beta_kl * klv / B
    d_enc = np.concatenate([d_mu, d_lv], axis=1)
    g["enc_W2"] = d_enc.T @ h1
    g["enc_b2"] = d_enc.sum(0)
    d_a1 = (d_enc @ p["enc_W2"]) * h1 * (1.0 - h1)
    g["enc_W1"] = d_a1.T @ x
    g["enc_b1"] = d_a1.sum(0)
    return g


def train_step(model: FVaeModel, images, seed, lr: float):
    _, cache = fvae_forward(model, images, seed)
    grads = fvae_backward(model, cache)
    params = {k: v - lr * grads[k] for k, v in model.params.items()}
    return FVaeModel(params, model.image_dim, model.hidden, model.latent_dim,
                     model.beta_kl), fvae_loss(model, cache)


def fit(model: FVaeModel, images, epochs: int, batch_size: int, lr: float, seed: int,
        on_epoch=None):
    history = []
    for epoch in range(epochs):
        rows = []
        for b, idx in enumerate(batches(len(images), batch_size, seed, epoch)):
            model, m = train_step(model, images[idx], np.random.default_rng([seed, epoch, b, 1]), lr)
            rows.append((len(idx), m))
        n = sum(k for k, _ in rows)
        summary = {"epoch": epoch + 1}
        for key in ("sse", "kl", "total"):
            summary[key] = sum(k * m[key] for k, m in rows) / n
        history.append(summary)
        if on_epoch is not None:
            on_epoch(model, summary)
    return model, history
