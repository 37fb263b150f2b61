"""Train a PINN on the 1-D wave equation and compare with the series solution.

u_tt = u_xx on [0, 2] x [0, 4], u(x, 0) = x(2 - x), u_t(x, 0) = 0, zero ends.
The run uses the shipped preset (L-BFGS, 1000 IC + 1000 BC + 10000 physics
points) with an optional shorter budget.

    python3 demos/02_wave_pinn.py --preset wave1d_842 --budget 500
"""

import argparse
import os

import numpy as np

from pinnlab.cli import render_svg
from pinnlab.config import load_config
from pinnlab.metrics import fit_convergence_rate, rel_l2_error
from pinnlab.pde import GridField
from pinnlab.training import build_model, evaluation_axes, track_convergence, train

ap = argparse.ArgumentParser()
ap.add_argument("--preset", default="wave1d_842")
ap.add_argument("--budget", type=int)
ap.add_argument("--out", default="demo_out/wave")
args = ap.parse_args()

cfg = load_config(args.preset)
problem = cfg.problem()
netspec = cfg.network_spec()
budget = args.budget or cfg["run"]["budget"]


def progress(it, parts, th):
    if it % 100 == 0:
        print(f"iter {it:5d}  IC {parts['ic']:.2e}  BC {parts['bc']:.2e}  physics {parts['physics']:.2e}")


params, hist = train(
    problem, netspec, cfg.optimizer_spec(), cfg.loss_spec(problem), budget, cfg["run"]["seed"],
    snapshot_interval=50, callback=progress,
)
model = build_model(params, problem, netspec)
print(f"wall time {hist.wall_time:.0f} s")

axes = evaluation_axes(problem, (200, 400))
approx = GridField.from_function(model, axes, ("x", "t"))
truth = GridField.from_function(problem.analytical, axes, ("x", "t"))
print(f"relative L2 error on the 200x400 grid: {rel_l2_error(truth, approx):.3e}")

errs = [(n, e) for n, e in track_convergence(hist, problem.analytical) if n > 0]
if len(errs) >= 3:
    gamma, rate = fit_convergence_rate(errs)
    print(f"snapshot errors follow e = {gamma:.3g} N^{rate:.3f}")

os.makedirs(args.out, exist_ok=True)
render_svg(approx, os.path.join(args.out, "pinn.svg"))
render_svg(GridField(axes, np.abs(approx.values - truth.values)), os.path.join(args.out, "abs_error.svg"))
print("figures in", args.out)
