"""Continuous Hopfield networks trained with equilibrium propagation, assembled
into variational autoencoders (layered, dense and tied-weight variants)."""

from .chn import (ChnParams, ChnState, ConnectivityMask, SettleConfig, build_topology,
                  energy, energy_grad, init_params, rho, rho_prime, settle, step)
from .ep import (EpConfig, PhasePair, QuadraticLoss, apply_sgd, ep_gradients, free_phase,
                 input_gradient, nudged_phase, weight_gradient)
from .vae import VaeModel, build_vae, decode, encode, reparameterize, train_step

__version__ = "0.1.0"
