"""
The feedforward baseline
========================

A one-hidden-layer sigmoid encoder and decoder with a tanh output, trained with
ordinary backprop. The analytic gradients are checked against finite
differences before training.
"""
# %%
import numpy as np

from epvae.config import DATA_DIR
from epvae.data import load_mnist
from epvae.fvae import build_fvae, fit, fvae_backward, fvae_forward, fvae_loss

m = build_fvae(6, 4, 2, beta_kl=1.0, seed=0)
x = np.random.default_rng(0).uniform(-1, 1, (4, 6))
eps = np.random.default_rng(1).standard_normal((4, 2))
grads = fvae_backward(m, fvae_forward(m, x, epsilon=eps)[1])

name, h = "dec_W2", 1e-6
W = m.params[name]
W[0, 0] += h
up = fvae_loss(m, fvae_forward(m, x, epsilon=eps)[1])["total"]
W[0, 0] -= 2 * h
down = fvae_loss(m, fvae_forward(m, x, epsilon=eps)[1])["total"]
W[0, 0] += h
print(f"{name}[0, 0]: analytic {grads[name][0, 0]:.8f}  finite difference {(up - down) / (2 * h):.8f}")

# %%
data = load_mnist(DATA_DIR / "mnist5k-images-idx3-ubyte.gz",
                  DATA_DIR / "mnist5k-labels-idx1-ubyte.gz")
model = build_fvae(784, 64, 8, beta_kl=1.0, seed=0)
model, history = fit(model, data.images[:1000], epochs=5, batch_size=10, lr=1e-3, seed=0)
for row in history:
    print(f"epoch {row['epoch']}: sse {row['sse']:.2f}  kl {row['kl']:.2f}")
