"""
Equilibrium propagation against finite differences
==================================================

EP estimates the loss gradient from three settled states: a free phase and two
phases in which the outputs are weakly nudged towards (+beta) and away from
(-beta) the target. We compare those estimates with central differences taken
by re-settling the network for every perturbed weight.
"""
# %%
import numpy as np

from epvae.ep import QuadraticLoss, gradcheck_config, input_gradient, run_phases, weight_gradient
from epvae.gradcheck import format_table, random_problem, run_gradcheck
from epvae.oracle import compare, fd_weight_gradient

params, x, target = random_problem("dense", (3, 6, 2), seed=0)
loss = QuadraticLoss(params.mask.output_idx, target)

# %%
# One estimate at a time: the symmetric estimator's error shrinks like beta^2.
reference = fd_weight_gradient(params, x, loss)
for beta in (0.2, 0.1, 0.05, 0.01):
    pair = run_phases(params, x, loss.grad, gradcheck_config(beta))
    r = compare(weight_gradient(pair, params, beta), reference)
    print(f"beta {beta:<5} cosine {r.cosine:.6f}  rel-L2 {r.rel_l2:.2e}")

# %%
# The same check over several random nets, as ``ephv gradcheck`` prints it.
print(format_table(run_gradcheck("H", seeds=range(3))))
print(format_table(run_gradcheck("DH", seeds=range(3))))
