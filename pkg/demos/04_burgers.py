"""Viscous Burgers: finite-difference reference, PINN, and where the errors sit.

u_t + u u_x = nu u_xx with nu = 0.01/pi, u(x, 0) = -sin(pi x), u(+-1, t) = 0.
The steep front at x = 0 is hard for the network; the Spearman correlation
between |error| and |grad u| quantifies how much of the error lives there.

    python3 demos/04_burgers.py --budget 1000
"""

import argparse
import os

import numpy as np

from pinnlab.cli import reference_for, render_svg
from pinnlab.config import load_config
from pinnlab.metrics import error_gradient_correlation, gradient_norm_field, rel_l2_error
from pinnlab.pde import GridField
from pinnlab.training import build_model, train

ap = argparse.ArgumentParser()
ap.add_argument("--budget", type=int)
ap.add_argument("--out", default="demo_out/burgers")
args = ap.parse_args()

cfg = load_config("burgers")
problem = cfg.problem()
netspec = cfg.network_spec()

print("solving the finite-difference reference ...")
ref, axes = reference_for(problem, cfg)
print(f"odd-symmetry defect of the reference: {np.abs(ref.values + ref.values[::-1]).max():.1e}")

budget = args.budget or cfg["run"]["budget"]
params, hist = train(
    problem, netspec, cfg.optimizer_spec(), cfg.loss_spec(problem), budget, cfg["run"]["seed"],
    snapshot_interval=0,
    callback=lambda it, parts, th: it % 250 == 0 and print(f"iter {it:5d}  loss {parts['total']:.3e}"),
)
model = build_model(params, problem, netspec)
approx = GridField.from_function(model, axes, ("x", "t"))
err = GridField(axes, np.abs(approx.values - ref.values), ("x", "t"))
print(f"relative L2 error vs reference: {rel_l2_error(ref, approx):.3e}")
rho = error_gradient_correlation(err, gradient_norm_field(model, axes))
print(f"Spearman(|error|, |grad u|) = {rho:.3f}")

os.makedirs(args.out, exist_ok=True)
render_svg(ref, os.path.join(args.out, "reference.svg"))
render_svg(approx, os.path.join(args.out, "pinn.svg"))
render_svg(err, os.path.join(args.out, "abs_error.svg"))
print("figures in", args.out)
