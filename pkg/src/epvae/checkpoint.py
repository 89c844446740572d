"""Binary checkpoints.

Layout (little-endian)::

    b"EPHV" | u32 version | u32 header length | header (UTF-8 JSON, sorted keys)
    | float64 arrays, row-major, in the order listed under header["arrays"]

CHN variants store the encoder then the decoder matrix, or one ``shared``
matrix for the tied variant, which is re-aliased on load.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .chn import SettleConfig, ChnParams, build_topology
from .ep import EpConfig
from .fvae import PARAM_NAMES, FVaeModel
from .vae import VaeModel

MAGIC = b"EPHV"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _ep_dict(ep: EpConfig):
    return {"beta": ep.beta,
            "free": [ep.settle_free.dt, ep.settle_free.max_iters, ep.settle_free.tol],
            "nudged": [ep.settle_nudged.dt, ep.settle_nudged.max_iters, ep.settle_nudged.tol]}


def _mask_desc(p: ChnParams):
    m = p.mask
    return {"kind": m.kind, "sizes": [m.n_in, m.n_hidden, m.n_out]}


def encode_checkpoint(model, config=None, rng_state=None) -> bytes:
    header = {"variant": model.variant,
              "config": config.to_dict() if hasattr(config, "to_dict") else config,
              "rng_state": rng_state}
    if isinstance(model, FVaeModel):
        header["model"] = {"image_dim": model.image_dim, "hidden": model.hidden,
                           "latent_dim": model.latent_dim, "beta_kl": model.beta_kl}
        arrays = [(name, model.params[name]) for name in PARAM_NAMES]
    else:
        header["model"] = {"image_dim": model.image_dim, "latent_dim": model.latent_dim,
                           "beta_kl": model.beta_kl, "fixed_sigma": model.fixed_sigma,
                           "ep": _ep_dict(model.ep)}
        if model.tied:
            header["mask"] = {"shared": _mask_desc(model.encoder)}
            arrays = [("shared", model.encoder.W)]
        else:
            header["mask"] = {"encoder": _mask_desc(model.encoder),
                              "decoder": _mask_desc(model.decoder)}
            arrays = [("encoder", model.encoder.W), ("decoder", model.decoder.W)]
    header["arrays"] = [[name, list(np.shape(a))] for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays]
    return b"".join(parts)


def decode_checkpoint(buf: bytes):
    """Returns ``(model, config_dict, rng_state)``."""
    if len(buf) < 12:
        raise CheckpointError(f"truncated checkpoint: {len(buf)} bytes, header needs 12")
    if buf[:4] != MAGIC:
        raise CheckpointError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    version, hlen = struct.unpack("<II", buf[4:12])
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version}, this build reads {VERSION}")
    if len(buf) < 12 + hlen:
        raise CheckpointError("truncated checkpoint header")
    header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    pos = 12 + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        nbytes = 8 * int(np.prod(shape))
        if len(buf) < pos + nbytes:
            raise CheckpointError(f"truncated checkpoint: array {name!r} at offset {pos}")
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=nbytes // 8,
                                     offset=pos).reshape(shape).astype(np.float64)
        pos += nbytes
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes after the last array")

    meta = header["model"]
    if header["variant"] == "F":
        model = FVaeModel({k: arrays[k] for k in PARAM_NAMES}, meta["image_dim"],
                          meta["hidden"], meta["latent_dim"], meta["beta_kl"])
    else:
        def params(name):
            desc = header["mask"][name]
            return ChnParams(build_topology(desc["kind"], *desc["sizes"]), arrays[name])

        e = meta["ep"]
        ep = EpConfig(e["beta"], SettleConfig(*e["free"]), SettleConfig(*e["nudged"]))
        if "shared" in header["mask"]:
            enc = dec = params("shared")
        else:
            enc, dec = params("encoder"), params("decoder")
        model = VaeModel(header["variant"], enc, dec, meta["image_dim"], meta["latent_dim"],
                         meta["beta_kl"], meta["fixed_sigma"], ep)
    return model, header["config"], header["rng_state"]


def save_checkpoint(path, model, config=None, rng_state=None):
    Path(path).write_bytes(encode_checkpoint(model, config, rng_state))


def load_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())
