"""
Training a dense Hopfield VAE on MNIST digits
=============================================

Encoder and decoder are each a dense continuous Hopfield network; every weight
update comes from EP phases. A few epochs on a thousand digits take a couple
of minutes on a laptop CPU.
"""
# %%
import sys
from pathlib import Path

from epvae import cli
from epvae.config import preset

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 3
cfg = preset("desk-dhvae", n_train=1000, n_eval=200, epochs=epochs)
out = Path("runs/demo-dh")
model, history = cli.train(cfg, out)

# %%
report = cli.evaluate(model, cfg, n_samples=100, seed=0)
for k, v in report.items():
    print(f"{k:>24s}  {v:.4f}" if isinstance(v, float) else f"{k:>24s}  {v}")

# %%
# Pictures: samples from the prior and reconstructions of held-out digits.
cli.main(["generate", "--checkpoint", str(out / "latest.ephv"), "--n", "20",
          "--out", str(out / "samples.pgm")])
cli.main(["reconstruct", "--checkpoint", str(out / "latest.ephv"), "--start", "4800",
          "--count", "10", "--out", str(out / "recon.pgm")])
print("wrote", out / "samples.pgm", "and", out / "recon.pgm")
