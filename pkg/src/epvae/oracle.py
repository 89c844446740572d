"""Brute-force finite-difference gradients of the equilibrium loss.

These only call the settling dynamics and the loss; they never look at the
nudged phases, so they serve as an independent check on the EP estimators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chn import ChnParams, SettleConfig, initial_state, settle_array

ORACLE_SETTLE = SettleConfig(dt=0.5, max_iters=20000, tol=1e-9)


@dataclass
class OracleReport:
    cosine: float
    rel_l2: float
    max_abs_diff: float
    table: list  # (index, estimate, oracle) rows

    def passed(self, min_cosine=0.99, max_rel_l2=None):
        ok = self.cosine >= min_cosine
        if max_rel_l2 is not None:
            ok = ok and self.rel_l2 <= max_rel_l2
        return ok


def compare(est, oracle_val) -> OracleReport:
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(oracle_val, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    e, r = est.ravel(), ref.ravel()
    ne, nr = np.linalg.norm(e), np.linalg.norm(r)
    if ne == 0.0 and nr == 0.0:
        cosine = 1.0
    elif ne == 0.0 or nr == 0.0:
        cosine = 0.0
    else:
        cosine = float(np.clip(e @ r / (ne * nr), -1.0, 1.0))
    diff = e - r
    rel = float(np.linalg.norm(diff) / nr) if nr > 0 else (0.0 if ne == 0 else np.inf)
    table = [(np.unravel_index(k, est.shape), e[k], r[k]) for k in range(e.size)]
    return OracleReport(cosine, rel, float(np.max(np.abs(diff), initial=0.0)), table)


def _equilibrium_losses(W_stack, clamped_idx, clamped_values, loss_fn, cfg):
    n = W_stack.shape[-1]
    values = np.broadcast_to(np.asarray(clamped_values, dtype=np.float64),
                             (len(W_stack), len(clamped_idx)))
    state = initial_state(n, clamped_idx, values)
    s, _, _ = settle_array(W_stack, state.s, state.free, cfg)
    return np.asarray(loss_fn(s), dtype=np.float64)


def fd_weight_gradient(params: ChnParams, clamped_values, loss_fn, h: float = 1e-4,
                       clamped_idx=None, cfg: SettleConfig = ORACLE_SETTLE) -> np.ndarray:
    """Central differences of the equilibrium loss w.r.t. each allowed weight pair.

    Every pair {i, j} is moved by +/-h on both W[i, j] and W[j, i] and the
    network re-settles from zero. ``loss_fn`` maps a batch of states to a
    vector of losses.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if clamped_idx is None:
        clamped_idx = params.mask.input_idx
    iu, ju = np.nonzero(np.triu(params.mask.allowed, k=1))
    m = len(iu)
    stack = np.repeat(params.W[None], 2 * m, axis=0)
    k = np.arange(m)
    for sign, off in ((+1.0, 0), (-1.0, m)):
        stack[k + off, iu, ju] += sign * h
        stack[k + off, ju, iu] += sign * h
    losses = _equilibrium_losses(stack, clamped_idx, clamped_values, loss_fn, cfg)
    g = np.zeros_like(params.W)
    d = (losses[:m] - losses[m:]) / (2.0 * h)
    g[iu, ju] = d
    g[ju, iu] = d
    return g


def fd_input_gradient(params: ChnParams, clamped_values, loss_fn, h: float = 1e-4,
                      clamped_idx=None, cfg: SettleConfig = ORACLE_SETTLE) -> np.ndarray:
    """Central differences of the equilibrium loss w.r.t. each clamped value."""
    if h <= 0:
        raise ValueError("h must be positive")
    if clamped_idx is None:
        clamped_idx = params.mask.input_idx
    x = np.asarray(clamped_values, dtype=np.float64)
    k = len(x)
    pert = np.concatenate([x + h * np.eye(k), x - h * np.eye(k)])
    n = params.n_total
    state = initial_state(n, clamped_idx, pert)
    s, _, _ = settle_array(params.W, state.s, state.free, cfg)
    losses = np.asarray(loss_fn(s), dtype=np.float64)
    return (losses[:k] - losses[k:]) / (2.0 * h)
