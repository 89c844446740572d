"""
Settling a continuous Hopfield network
======================================

A symmetric network relaxes by gradient descent on its energy. Here we build a
small dense net, clamp its inputs and watch the energy fall step by step until
the state stops moving.
"""
# %%
import numpy as np

from epvae.chn import (DENSE, SettleConfig, build_topology, energy, init_params, initial_state,
                       settle, step)

mask = build_topology(DENSE, 4, 12, 3)
params = init_params(mask, seed=0)
print(f"{mask.n_total} neurons, {mask.n_pairs} connected pairs")

# %%
# Clamp the four input neurons to a random pattern; the rest start at zero.
x = np.random.default_rng(1).uniform(-1, 1, mask.n_in)
state = initial_state(mask.n_total, mask.input_idx, x)
cfg = SettleConfig(dt=0.05, max_iters=2000, tol=1e-6)

energies = [energy(params, state)]
for _ in range(40):
    state = step(params, state, cfg)
    energies.append(energy(params, state))
print("energy over the first 40 steps:")
print(np.round(energies[::8], 6))
assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

# %%
# ``settle`` runs the same loop until the largest state change drops below tol.
fixed, iters, converged = settle(params, initial_state(mask.n_total, mask.input_idx, x), cfg)
print(f"settled in {iters} steps (converged: {converged})")
print("output neurons:", np.round(fixed.s[mask.output_idx], 4))
