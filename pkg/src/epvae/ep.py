"""Three-phase equilibrium propagation: free phase, +/-beta nudged phases and the
weight and input gradient estimators built from them.

Loss gradients are passed as callables ``loss_grad(s) -> dL/ds`` that return
zeros off the read-out neurons. Everything broadcasts over a leading batch
axis; batched weight gradients are averaged over the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chn import (ChnParams, ChnState, SettleConfig, initial_state, rho, rho_prime,
                  settle)


@dataclass(frozen=True)
class EpConfig:
    beta: float = 0.1
    settle_free: SettleConfig = field(default_factory=lambda: SettleConfig(0.05, 200, 1e-6))
    settle_nudged: SettleConfig = field(default_factory=lambda: SettleConfig(0.05, 50, 1e-6))

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def gradcheck_config(beta=0.01, tol=1e-11, dt=0.5, max_iters=20000) -> EpConfig:
    """Tight settling used when comparing against finite differences."""
    cfg = SettleConfig(dt, max_iters, tol)
    return EpConfig(beta, cfg, cfg)


@dataclass
class PhasePair:
    s_free: ChnState
    s_plus: ChnState
    s_minus: ChnState


class QuadraticLoss:
    """L(s) = 1/2 |s[idx] - target|^2, the SSE used throughout this package."""

    def __init__(self, idx, target, scale=1.0):
        self.idx = np.asarray(idx, dtype=int)
        self.target = np.asarray(target, dtype=np.float64)
        self.scale = scale

    def __call__(self, s):
        d = np.asarray(s)[..., self.idx] - self.target
        return 0.5 * self.scale * np.sum(d * d, axis=-1)

    def grad(self, s):
        g = np.zeros_like(s)
        g[..., self.idx] = self.scale * (s[..., self.idx] - self.target)
        return g


def free_phase(params: ChnParams, clamped_values, cfg: EpConfig, clamped_idx=None) -> ChnState:
    """Settle from zero with ``clamped_values`` held on ``clamped_idx`` (default: the inputs)."""
    if clamped_idx is None:
        clamped_idx = params.mask.input_idx
    state = initial_state(params.n_total, clamped_idx, clamped_values)
    out, _, _ = settle(params, state, cfg.settle_free)
    return out


def nudged_phase(params: ChnParams, s_free: ChnState, loss_grad, signed_beta: float,
                 cfg: EpConfig) -> ChnState:
    """Settle under E + signed_beta * L, starting from the free equilibrium."""
    out, _, _ = settle(params, s_free, cfg.settle_nudged,
                       nudge=lambda s: signed_beta * loss_grad(s))
    return out


def run_phases(params: ChnParams, clamped_values, loss_grad, cfg: EpConfig,
               clamped_idx=None, s_free: ChnState = None) -> PhasePair:
    if s_free is None:
        s_free = free_phase(params, clamped_values, cfg, clamped_idx)
    s_plus = nudged_phase(params, s_free, loss_grad, +cfg.beta, cfg)
    s_minus = nudged_phase(params, s_free, loss_grad, -cfg.beta, cfg)
    return PhasePair(s_free, s_plus, s_minus)


def _outer_mean(r):
    r = np.atleast_2d(r)
    return (r.T @ r) / len(r)


def weight_gradient(pair: PhasePair, params: ChnParams, beta: float) -> np.ndarray:
    """dL/dW estimate (1/2beta) [rho(s-) rho(s-)^T - rho(s+) rho(s+)^T] on the mask.

    Entry (i, j) is the derivative w.r.t. the shared weight of the pair {i, j},
    so ``W - lr * grad`` descends the loss.
    """
    g = (_outer_mean(rho(pair.s_minus.s)) - _outer_mean(rho(pair.s_plus.s))) / (2.0 * beta)
    g = 0.5 * (g + g.T)
    return np.where(params.mask.allowed, g, 0.0)


def input_gradient(pair: PhasePair, params: ChnParams, beta: float, input_idx=None) -> np.ndarray:
    """dL/dx for clamped inputs: (1/2beta) [dF/dx at s+ - dF/dx at s-].

    With dF/dx_j = x_j - rho'(x_j) (W rho(s))_j the x_j terms cancel.
    """
    if input_idx is None:
        input_idx = pair.s_free.clamped
    input_idx = np.asarray(input_idx, dtype=int)
    Wx = params.W[input_idx]
    x = pair.s_plus.s[..., input_idx]
    diff = rho(pair.s_plus.s) - rho(pair.s_minus.s)
    return -rho_prime(x) * (diff @ Wx.T) / (2.0 * beta)


def ep_gradients(params: ChnParams, clamped_values, loss_grad, cfg: EpConfig,
                 clamped_idx=None):
    """Free phase plus both nudged phases. Returns ``(weight_grad, input_grad, pair)``."""
    pair = run_phases(params, clamped_values, loss_grad, cfg, clamped_idx)
    return (weight_gradient(pair, params, cfg.beta),
            input_gradient(pair, params, cfg.beta),
            pair)


def apply_sgd(params: ChnParams, weight_grad, lr: float) -> ChnParams:
    W = np.where(params.mask.allowed, params.W - lr * np.asarray(weight_grad), 0.0)
    return ChnParams(params.mask, W)
