"""EP-versus-finite-difference comparisons on small random networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chn import DENSE, LAYERED, ChnParams, build_topology, init_params
from .ep import QuadraticLoss, gradcheck_config, input_gradient, run_phases, weight_gradient
from .oracle import OracleReport, compare, fd_input_gradient, fd_weight_gradient

MAX_NEURONS = 60
KIND_FOR_VARIANT = {"H": LAYERED, "DH": DENSE, "TDH": DENSE,
                    LAYERED: LAYERED, DENSE: DENSE}


@dataclass
class GradcheckRow:
    seed: int
    kind: str
    weight: OracleReport
    input: OracleReport


def random_problem(kind, sizes, seed, weight_scale=1.0):
    """A random net plus clamped input and output target, both uniform on [-1, 1]."""
    mask = build_topology(kind, *sizes)
    params = init_params(mask, seed)
    if weight_scale != 1.0:
        params = ChnParams(mask, params.W * weight_scale)
    rng = np.random.default_rng([seed, 1])
    x = rng.uniform(-1.0, 1.0, mask.n_in)
    target = rng.uniform(-1.0, 1.0, mask.n_out)
    return params, x, target


def check_problem(params, x, loss, beta=0.01, h=1e-4, weight_estimator=weight_gradient,
                  input_estimator=input_gradient):
    cfg = gradcheck_config(beta)
    pair = run_phases(params, x, loss.grad, cfg)
    w_est = weight_estimator(pair, params, beta)
    x_est = input_estimator(pair, params, beta, params.mask.input_idx)
    w_ref = fd_weight_gradient(params, x, loss, h)
    x_ref = fd_input_gradient(params, x, loss, h)
    return compare(w_est, w_ref), compare(x_est, x_ref)


def run_gradcheck(variant="DH", beta=0.01, h=1e-4, seeds=range(5), sizes=(3, 4, 3),
                  loss_scale=1.0, weight_estimator=weight_gradient,
                  input_estimator=input_gradient) -> list[GradcheckRow]:
    kind = KIND_FOR_VARIANT[variant]
    if sum(sizes) > MAX_NEURONS:
        raise ValueError(f"gradcheck is limited to {MAX_NEURONS} neurons, got {sum(sizes)}")
    rows = []
    for seed in seeds:
        params, x, target = random_problem(kind, sizes, seed)
        loss = QuadraticLoss(params.mask.output_idx, target, scale=loss_scale)
        w, i = check_problem(params, x, loss, beta, h, weight_estimator, input_estimator)
        rows.append(GradcheckRow(seed, kind, w, i))
    return rows


def format_table(rows) -> str:
    lines = ["seed  kind     weight_cos  weight_rel_l2  input_cos  input_rel_l2"]
    for r in rows:
        lines.append(f"{r.seed:<5d} {r.kind:<8s} {r.weight.cosine:10.6f}  {r.weight.rel_l2:13.3e}"
                     f"  {r.input.cosine:9.6f}  {r.input.rel_l2:12.3e}")
    return "\n".join(lines)


def all_pass(rows, min_cosine=0.99) -> bool:
    return all(r.weight.cosine >= min_cosine and r.input.cosine >= min_cosine for r in rows)
