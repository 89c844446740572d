"""Continuous Hopfield network: topology, parameters, energy and Euler settling.

States are float64 arrays of shape ``(n,)`` or ``(batch, n)``; every routine
broadcasts over the leading batch axis. Weights are symmetric with a zero
diagonal and no biases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

LAYERED = "layered"
DENSE = "dense"

RHO_GAIN = 3.0


class NumericalDivergenceError(FloatingPointError):
    def __init__(self, iteration, rows=None):
        where = "" if rows is None else f" in rows {list(rows)}"
        super().__init__(f"non-finite state at settle iteration {iteration}{where}")
        self.iteration = iteration
        self.rows = rows


def rho(x):
    """Compressed sigmoid 1 / (1 + exp(-3x))."""
    return 0.5 * (1.0 + np.tanh(0.5 * RHO_GAIN * np.asarray(x, dtype=np.float64)))


def rho_prime(x):
    r = rho(x)
    return RHO_GAIN * r * (1.0 - r)


@dataclass(frozen=True, eq=False)
class ConnectivityMask:
    kind: str
    n_in: int
    n_hidden: int
    n_out: int
    allowed: np.ndarray = field(repr=False)

    @property
    def n_total(self):
        return self.n_in + self.n_hidden + self.n_out

    @property
    def input_idx(self):
        return np.arange(0, self.n_in)

    @property
    def hidden_idx(self):
        return np.arange(self.n_in, self.n_in + self.n_hidden)

    @property
    def output_idx(self):
        return np.arange(self.n_in + self.n_hidden, self.n_total)

    @property
    def n_pairs(self):
        """Number of allowed ordered pairs."""
        return int(self.allowed.sum())


def build_topology(kind: str, n_in: int, n_hidden: int, n_out: int) -> ConnectivityMask:
    """Neurons are laid out as ``[inputs | hidden | outputs]``."""
    if kind not in (LAYERED, DENSE):
        raise ValueError(f"unknown topology kind {kind!r}")
    if min(n_in, n_hidden, n_out) < 1:
        raise ValueError(f"partition sizes must be >= 1, got ({n_in}, {n_hidden}, {n_out})")
    n = n_in + n_hidden + n_out
    if kind == DENSE:
        allowed = ~np.eye(n, dtype=bool)
    else:
        allowed = np.zeros((n, n), dtype=bool)
        i, h, o = slice(0, n_in), slice(n_in, n_in + n_hidden), slice(n_in + n_hidden, n)
        allowed[i, h] = allowed[h, i] = True
        allowed[h, o] = allowed[o, h] = True
    allowed.flags.writeable = False
    return ConnectivityMask(kind, n_in, n_hidden, n_out, allowed)


@dataclass(frozen=True, eq=False)
class ChnParams:
    mask: ConnectivityMask
    W: np.ndarray = field(repr=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        n = self.mask.n_total
        if W.shape != (n, n):
            raise ValueError(f"W has shape {W.shape}, mask expects {(n, n)}")
        if not np.array_equal(W, W.T):
            raise ValueError("W must be exactly symmetric")
        if np.any(W[~self.mask.allowed] != 0.0):
            raise ValueError("W has weight outside the connectivity mask")
        W.flags.writeable = False
        object.__setattr__(self, "W", W)

    @property
    def n_total(self):
        return self.mask.n_total


def init_params(mask: ConnectivityMask, seed: int) -> ChnParams:
    """Symmetric fan-based uniform init: each allowed pair {i, j} gets one draw
    from U(-a, a) with a = sqrt(6 / (deg(i) + deg(j))).

    Draws are taken in row-major order over the upper triangle.
    """
    deg = mask.allowed.sum(axis=1)
    iu, ju = np.nonzero(np.triu(mask.allowed, k=1))
    bound = np.sqrt(6.0 / (deg[iu] + deg[ju]))
    vals = np.random.default_rng(seed).uniform(-1.0, 1.0, size=len(iu)) * bound
    W = np.zeros((mask.n_total, mask.n_total))
    W[iu, ju] = vals
    W[ju, iu] = vals
    return ChnParams(mask, W)


@dataclass
class ChnState:
    s: np.ndarray
    clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        self.clamped = np.asarray(self.clamped, dtype=int)
        n = self.s.shape[-1]
        if self.clamped.size and (self.clamped.min() < 0 or self.clamped.max() >= n):
            raise ValueError("clamped index out of range")

    @property
    def free(self) -> np.ndarray:
        m = np.ones(self.s.shape[-1], dtype=bool)
        m[self.clamped] = False
        return m

    def copy(self) -> "ChnState":
        return ChnState(self.s.copy(), self.clamped.copy())


def initial_state(n_total: int, clamped_idx, clamped_values) -> ChnState:
    """All free neurons start at zero; clamped ones carry the given values."""
    clamped_idx = np.asarray(clamped_idx, dtype=int)
    values = np.asarray(clamped_values, dtype=np.float64)
    s = np.zeros(values.shape[:-1] + (n_total,))
    s[..., clamped_idx] = values
    return ChnState(s, clamped_idx)


@dataclass(frozen=True)
class SettleConfig:
    dt: float = 0.05
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.dt <= 1.0:
            raise ValueError(f"dt must lie in (0, 1], got {self.dt}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")


def _check_dims(W, s):
    if s.shape[-1] != W.shape[-1]:
        raise ValueError(f"state length {s.shape[-1]} does not match {W.shape[-1]} neurons")


def drive(W, r):
    """W @ r along the last axis; W may be one matrix or a stack matching r's batch."""
    if W.ndim == 2:
        return r @ W  # W symmetric
    return np.einsum("pij,pj->pi", W, r)


def energy(params: ChnParams, state: ChnState):
    """E(s) = 1/2 |s|^2 - 1/2 rho(s)^T W rho(s), per batch row."""
    W, s = params.W, state.s
    _check_dims(W, s)
    r = rho(s)
    return 0.5 * np.sum(s * s, axis=-1) - 0.5 * np.sum(r * drive(W, r), axis=-1)


def energy_grad_array(W, s):
    _check_dims(W, s)
    return s - rho_prime(s) * drive(W, rho(s))


def energy_grad(params: ChnParams, state: ChnState) -> np.ndarray:
    """Gradient of the energy w.r.t. every neuron, clamped ones included."""
    return energy_grad_array(params.W, state.s)


Nudge = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _nudge_value(nudge, s):
    if nudge is None:
        return None
    return nudge(s) if callable(nudge) else nudge


def step_array(W, s, free, dt, nudge=None):
    """One Euler step on the free entries; ``nudge`` is beta * dL/ds (zero off outputs)."""
    ds = -energy_grad_array(W, s)
    nv = _nudge_value(nudge, s)
    if nv is not None:
        ds = ds - nv
    return np.where(free, s + dt * ds, s)


def step(params: ChnParams, state: ChnState, cfg: SettleConfig, nudge: Nudge = None) -> ChnState:
    return ChnState(step_array(params.W, state.s, state.free, cfg.dt, nudge), state.clamped)


def settle_array(W, s, free, cfg: SettleConfig, nudge: Nudge = None):
    """Iterate Euler steps until the max-norm change over the whole batch drops
    below ``cfg.tol``. ``W`` may be one matrix or a stack with one matrix per row.

    Returns ``(s, iters_used, converged)``.
    """
    s = np.array(s, dtype=np.float64)
    if W.ndim == 3 and s.ndim != 2:
        raise ValueError("stacked weights need a batched state")
    converged = False
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        new = step_array(W, s, free, cfg.dt, nudge)
        if not np.all(np.isfinite(new)):
            bad = np.nonzero(~np.all(np.isfinite(np.atleast_2d(new)), axis=1))[0]
            raise NumericalDivergenceError(iters, bad)
        change = np.max(np.abs(new - s))
        s = new
        if change < cfg.tol:
            converged = True
            break
    return s, iters, converged


def settle(params: ChnParams, state: ChnState, cfg: SettleConfig, nudge: Nudge = None):
    """Run the dynamics to equilibrium. Returns ``(state, iters_used, converged)``."""
    _check_dims(params.W, state.s)
    s, iters, ok = settle_array(params.W, state.s, state.free, cfg, nudge)
    return ChnState(s, state.clamped.copy()), iters, ok
