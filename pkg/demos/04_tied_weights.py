"""
One network for both directions
===============================

In the tied variant the encoder and decoder are the same symmetric matrix: the
encoder clamps the image and reads the latent mean, the decoder clamps the
latent and reads the image. The posterior variance is fixed, so only the mean
is learned. Both roles' gradients are summed into the single matrix.
"""
# %%
import numpy as np

from epvae.data import load_mnist
from epvae.config import DATA_DIR
from epvae.vae import build_vae, fit, reconstruct

data = load_mnist(DATA_DIR / "mnist5k-images-idx3-ubyte.gz",
                  DATA_DIR / "mnist5k-labels-idx1-ubyte.gz")
model = build_vae("TDH", 784, 32, 8, beta_kl=1.90, fixed_sigma=0.429, seed=0)
print("shared matrix:", model.encoder is model.decoder, model.encoder.W.shape)

# %%
model, history = fit(model, data.images[:300], epochs=2, batch_size=32, lr=1e-3, seed=0,
                     on_epoch=lambda m, h: print(f"epoch {h['epoch']}: total {h['total']:.2f}"))
W = model.encoder.W
print("still one matrix:", model.encoder is model.decoder, "| symmetric:", np.array_equal(W, W.T))

# %%
x = data.images[4900:4905]
sse = 0.5 * np.sum((reconstruct(model, x) - x) ** 2, axis=1)
print("held-out reconstruction SSE:", np.round(sse, 1))
