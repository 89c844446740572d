"""Command line entry point ``ephv``.

Exit codes: 0 success, 1 usage, 2 validation, 3 numerical divergence,
4 gradient check below threshold.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import fvae, vae
from .chn import NumericalDivergenceError
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .data import IdxFormatError, load_mnist, write_image_grid
from .gradcheck import MAX_NEURONS, all_pass, format_table, run_gradcheck
from .metrics import eval_reconstruction, pixel_mmd
from .vae import TrainingDivergenceError

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_GRADCHECK = 0, 1, 2, 3, 4

LOG_COLUMNS = ("epoch", "sse", "kl", "total", "wall_s")


class UsageError(Exception):
    pass


def build_model(cfg: RunConfig):
    if cfg.variant == "F":
        return fvae.build_fvae(cfg.image_dim, cfg.hidden, cfg.latent_dim, cfg.beta_kl, cfg.seed)
    return vae.build_vae(cfg.variant, cfg.image_dim, cfg.hidden, cfg.latent_dim, cfg.beta_kl,
                         cfg.fixed_sigma or None, cfg.seed, cfg.ep_config())


def split_dataset(cfg: RunConfig, images_path=None, labels_path=None):
    data = load_mnist(images_path or cfg.images, labels_path or cfg.labels)
    n_train = cfg.n_train or max(len(data) - cfg.n_eval, 0)
    if n_train + cfg.n_eval > len(data):
        raise ConfigError("n_train", f"n_train + n_eval = {n_train + cfg.n_eval} exceeds "
                          f"the {len(data)} images available")
    return data.images[:n_train], data.images[n_train:n_train + cfg.n_eval]


def _module(model):
    return fvae if isinstance(model, fvae.FVaeModel) else vae


def reconstruct(model, x):
    if isinstance(model, fvae.FVaeModel):
        mu, _ = fvae.encode(model, x)
        return fvae.decode(model, mu)
    return vae.reconstruct(model, x)


def generate(model, n, seed):
    z = np.random.default_rng(seed).standard_normal((n, model.latent_dim))
    return _module(model).decode(model, z)


def train(cfg: RunConfig, out_dir=None, log=print):
    """Train per ``cfg``; writes ``epoch_NNN.ephv``, ``latest.ephv`` and ``metrics.tsv``."""
    cfg.validate()
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_x, _ = split_dataset(cfg)
    model = build_model(cfg)
    save_checkpoint(out / "epoch_000.ephv", model, cfg, {"seed": cfg.seed, "epochs_done": 0})
    save_checkpoint(out / "latest.ephv", model, cfg, {"seed": cfg.seed, "epochs_done": 0})
    log_path = out / "metrics.tsv"
    log_path.write_text("\t".join(LOG_COLUMNS) + "\n")
    t0 = time.perf_counter()

    def on_epoch(m, summary):
        rng_state = {"seed": cfg.seed, "epochs_done": summary["epoch"]}
        save_checkpoint(out / f"epoch_{summary['epoch']:03d}.ephv", m, cfg, rng_state)
        save_checkpoint(out / "latest.ephv", m, cfg, rng_state)
        row = [str(summary["epoch"])] + [repr(summary[k]) for k in ("sse", "kl", "total")]
        row.append(f"{time.perf_counter() - t0:.3f}")
        with log_path.open("a") as f:
            f.write("\t".join(row) + "\n")
        log(f"epoch {summary['epoch']}: sse {summary['sse']:.4f} kl {summary['kl']:.4f} "
            f"total {summary['total']:.4f}")

    model, history = _module(model).fit(model, train_x, cfg.epochs, cfg.batch_size, cfg.lr,
                                        cfg.seed, on_epoch)
    return model, history


def read_metrics_log(path):
    lines = Path(path).read_text().splitlines()
    cols = lines[0].split("\t")
    return [dict(zip(cols, map(float, line.split("\t")))) for line in lines[1:]]


def _config_from_checkpoint(snapshot):
    return RunConfig(**snapshot) if snapshot else RunConfig()


def cmd_train(args):
    model, history = train(load_config(args.config), args.out)
    return EXIT_OK


def cmd_generate(args):
    if args.n < 1:
        raise ConfigError("n", "need at least one sample for the grid")
    model, _, _ = load_checkpoint(args.checkpoint)
    images = generate(model, args.n, args.seed)
    write_image_grid(images, min(args.n, args.cols), args.out)
    return EXIT_OK


def cmd_reconstruct(args):
    model, snapshot, _ = load_checkpoint(args.checkpoint)
    cfg = _config_from_checkpoint(snapshot)
    data = load_mnist(args.images or cfg.images, args.labels or cfg.labels)
    if args.count < 1 or args.start < 0 or args.start + args.count > len(data):
        raise ConfigError("count", f"slice [{args.start}, {args.start + args.count}) "
                          f"outside the {len(data)} available images")
    x = data.images[args.start:args.start + args.count]
    write_image_grid(np.concatenate([x, reconstruct(model, x)]), args.count, args.out)
    return EXIT_OK


def evaluate(model, cfg: RunConfig, n_samples=100, seed=0, images_path=None, labels_path=None):
    _, held_out = split_dataset(cfg, images_path, labels_path)
    if len(held_out) < 2:
        raise ConfigError("n_eval", "evaluation needs at least two held-out images")
    sse, skipped = eval_reconstruction(lambda x: reconstruct(model, x), held_out)
    gen = generate(model, n_samples, seed)
    noise = np.random.default_rng([seed, 1]).uniform(-1.0, 1.0, gen.shape)
    return {"eval_sse": sse, "skipped": skipped,
            "mmd_proxy_generated": pixel_mmd(gen, held_out),
            "mmd_proxy_uniform_noise": pixel_mmd(noise, held_out)}


def cmd_eval(args):
    model, snapshot, _ = load_checkpoint(args.checkpoint)
    cfg = _config_from_checkpoint(snapshot)
    report = evaluate(model, cfg, args.n, args.seed, args.images, args.labels)
    for k, v in report.items():
        print(f"{k}\t{v}")
    return EXIT_OK


def cmd_gradcheck(args):
    sizes = tuple(args.sizes)
    if sum(sizes) > MAX_NEURONS:
        raise ConfigError("sizes", f"{sum(sizes)} neurons exceeds the gradcheck limit of {MAX_NEURONS}")
    if args.beta <= 0 or args.h <= 0:
        raise ConfigError("beta/h", "both must be positive")
    rows = run_gradcheck(args.variant, args.beta, args.h, range(args.seeds), sizes)
    print(format_table(rows))
    ok = all_pass(rows)
    print("PASS" if ok else "FAIL: cosine below 0.99")
    return EXIT_OK if ok else EXIT_GRADCHECK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def make_parser():
    p = _Parser(prog="ephv", description="Hopfield VAEs trained with equilibrium propagation")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a key = value config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (default: out_dir from the config)")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="decode samples from the prior into a PGM grid")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--cols", type=int, default=10)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reconstruct", help="originals above reconstructions as a PGM grid")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--start", type=int, default=0)
    r.add_argument("--count", type=int, default=10)
    r.add_argument("--images")
    r.add_argument("--labels")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("gradcheck", help="compare EP gradients against finite differences")
    c.add_argument("--variant", default="DH", choices=["H", "DH", "TDH"])
    c.add_argument("--beta", type=float, default=0.01)
    c.add_argument("--h", type=float, default=1e-4)
    c.add_argument("--seeds", type=int, default=5)
    c.add_argument("--sizes", type=int, nargs=3, default=[3, 4, 3],
                   metavar=("N_IN", "N_HIDDEN", "N_OUT"))
    c.set_defaults(func=cmd_gradcheck)

    e = sub.add_parser("eval", help="held-out SSE and the pixel MMD proxy")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--n", type=int, default=100, help="generated samples for the MMD proxy")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--images")
    e.add_argument("--labels")
    e.set_defaults(func=cmd_eval)
    return p


def _thread_limit():
    n = os.environ.get("EPHV_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        with _thread_limit():
            return args.func(args)
    except (ConfigError, CheckpointError, IdxFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TrainingDivergenceError, NumericalDivergenceError) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
