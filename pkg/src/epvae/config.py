"""Run configuration: flat ``key = value`` files, named presets and range checks.

Legal ranges for the model hyperparameters are the published sweep ranges
(beta_kl up to 10 for the feed-forward baseline, 2 otherwise).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .chn import SettleConfig
from .ep import EpConfig

VARIANTS = ("F", "H", "DH", "TDH")
TOPOLOGY = {"F": "feedforward", "H": "layered", "DH": "dense", "TDH": "dense"}

DATA_DIR = Path(__file__).resolve().parents[2] / "data"


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    variant: str = "DH"
    topology: str = ""  # derived from variant when left empty
    image_dim: int = 784
    hidden: int = 64
    latent_dim: int = 8
    fixed_sigma: float = 0.0  # TDH only
    beta_kl: float = 0.556
    lr: float = 1e-3
    beta: float = 0.1
    dt: float = 0.05
    free_iters: int = 200
    nudged_iters: int = 50
    tol: float = 1e-6
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0
    images: str = str(DATA_DIR / "mnist5k-images-idx3-ubyte.gz")
    labels: str = str(DATA_DIR / "mnist5k-labels-idx1-ubyte.gz")
    n_train: int = 1000  # 0 means every image not reserved for evaluation
    n_eval: int = 200
    out_dir: str = "runs/default"

    def __post_init__(self):
        if not self.topology and self.variant in TOPOLOGY:
            self.topology = TOPOLOGY[self.variant]

    def ep_config(self) -> EpConfig:
        return EpConfig(self.beta,
                        SettleConfig(self.dt, self.free_iters, self.tol),
                        SettleConfig(self.dt, self.nudged_iters, self.tol))

    def to_dict(self):
        return dataclasses.asdict(self)

    def validate(self) -> "RunConfig":
        def check(key, lo, hi, lo_open=False):
            v = getattr(self, key)
            if (v <= lo if lo_open else v < lo) or v > hi:
                left = "(" if lo_open else "["
                raise ConfigError(key, f"{v} outside legal range {left}{lo}, {hi}]")

        if self.variant not in VARIANTS:
            raise ConfigError("variant", f"{self.variant!r} not one of {', '.join(VARIANTS)}")
        if self.topology != TOPOLOGY[self.variant]:
            raise ConfigError("topology", f"{self.topology!r} does not match variant "
                              f"{self.variant} (expects {TOPOLOGY[self.variant]!r})")
        check("beta_kl", 0.5, 10.0 if self.variant == "F" else 2.0)
        check("lr", 1e-5, 1e-3)
        check("hidden", 10, 2000)
        check("latent_dim", 2, 200)
        if self.variant == "TDH":
            check("fixed_sigma", 0.3, 1.0)
        elif self.fixed_sigma != 0.0:
            raise ConfigError("fixed_sigma", "only the TDH variant takes a fixed sigma")
        check("beta", 0.0, 1.0, lo_open=True)
        check("dt", 0.0, 1.0, lo_open=True)
        check("free_iters", 1, 10**7)
        check("nudged_iters", 1, 10**7)
        check("tol", 0.0, 1.0)
        check("batch_size", 1, 10**7)
        check("epochs", 0, 10**6)
        check("image_dim", 1, 10**7)
        check("n_train", 0, 10**8)
        check("n_eval", 0, 10**8)
        return self


PRESETS = {
    # published per-model optimum
    "published-fvae": dict(variant="F", beta_kl=5.55, lr=9.91e-4, hidden=1820, latent_dim=10),
    "published-hvae": dict(variant="H", beta_kl=0.517, lr=6.68e-5, hidden=1842, latent_dim=25),
    "published-dhvae": dict(variant="DH", beta_kl=0.556, lr=9.41e-4, hidden=1696, latent_dim=25),
    "published-tdhvae": dict(variant="TDH", beta_kl=1.90, lr=9.55e-4, hidden=833, latent_dim=69,
                          fixed_sigma=0.429),
    # CPU-sized runs on the bundled 5000-digit subset
    "desk-dhvae": dict(variant="DH", beta_kl=0.556, lr=1e-3, hidden=64, latent_dim=8),
    "desk-hvae": dict(variant="H", beta_kl=0.517, lr=1e-3, hidden=64, latent_dim=8),
    "desk-tdhvae": dict(variant="TDH", beta_kl=1.90, lr=1e-3, hidden=32, latent_dim=8,
                        fixed_sigma=0.429),
    "desk-fvae": dict(variant="F", beta_kl=1.0, lr=1e-3, hidden=64, latent_dim=8,
                      batch_size=10),
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; have {', '.join(PRESETS)}")
    values = {**PRESETS[name], **overrides}
    return RunConfig(**values)


def _coerce(key, raw, typ):
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {typ}") from None
    return raw


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Parse ``key = value`` lines. A ``preset`` line seeds the defaults; later
    keys override it. Relative paths resolve against ``base_dir``."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values, preset_name = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "preset":
            preset_name = raw
            continue
        if key not in types:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, raw, types[key])
    if base_dir is not None:
        for key in ("images", "labels", "out_dir"):
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(Path(base_dir) / values[key])
    cfg = preset(preset_name, **values) if preset_name else RunConfig(**values)
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())
