"""Explicit finite differences for the heated plate.

Unit square, alpha = 1.28e-4, edges held at 100 / 25 / 200 / 0 and an
initial temperature of 50.  Prints the plate centre over time and writes
heatmaps at t = 0, 10, 20.
"""

import os

import numpy as np

from pinnlab.cli import render_svg
from pinnlab.pde import StabilityError, heat2d_fd_solve, heat2d_problem

out = "demo_out/heat"
os.makedirs(out, exist_ok=True)
prob = heat2d_problem()
h = 0.02
print(f"stable time step limit h^2/(4 alpha) = {h * h / (4 * prob.coefficients['alpha']):.4f}")

try:
    heat2d_fd_solve(prob, h=h, dt=1.0, steps=1)
except StabilityError as err:
    print("rejected:", err)

dt, every = 0.002, 1000
fields = heat2d_fd_solve(prob, h=h, dt=dt, steps=10000, record_every=every)
times = [k * every * dt for k in range(len(fields))]
c = len(fields[0].axes[0]) // 2
for t, f in zip(times, fields):
    print(f"t = {t:5.1f}   centre {f.values[c, c]:.4f}   range [{f.values.min():.1f}, {f.values.max():.1f}]")

for t, f in list(zip(times, fields))[::5]:
    render_svg(f, os.path.join(out, f"heat_t{t:g}.svg"), "x", "y")
print("max principle holds:", all(0 <= f.values.min() and f.values.max() <= 200 for f in fields))
print("figures in", out)
