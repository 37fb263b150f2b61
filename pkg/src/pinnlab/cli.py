"""Command-line entry point: ``pinnlab train|evaluate|fd|plot``.

Exit status 0 on success, 2 on configuration or input errors, 3 when
training aborts on a non-finite loss.  ``PINNLAB_OUTPUT_DIR`` overrides the
output directory of every command.
"""

import argparse
import os
import sys

import numpy as np

from .autodiff import StructureError, primal_value
from .config import ConfigError, RunConfig, load_config, preset_names
from .metrics import error_report
from .network import load_params_csv, save_params_csv
from .pde import GridField, StabilityError, burgers_fd_solve, heat2d_fd_solve
from .training import TrainingAborted, build_model, evaluation_axes, train

__all__ = ["main", "cmd_train", "cmd_evaluate", "cmd_fd", "cmd_plot", "reference_for", "field_image", "render_svg"]

ENV_OUTPUT = "PINNLAB_OUTPUT_DIR"


class UsageError(Exception):
    """Reported on stderr with exit status 2."""


def _output_dir(flag, cfg=None):
    path = flag or os.environ.get(ENV_OUTPUT) or (cfg["run"]["output_dir"] if cfg is not None else "out")
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as err:
        raise UsageError(f"cannot create output directory {path}: {err.strerror}") from None
    if not os.access(path, os.W_OK | os.X_OK):
        raise UsageError(f"output directory {path} is not writable")
    return path


def _at_time(f, T):
    """Slice a space-time evaluator at t = T."""

    def g(x, y):
        return f(x, y, np.full(np.shape(primal_value(x)), float(T)) + 0.0 * x)

    return g


def reference_for(problem, cfg):
    """Reference evaluator or GridField on the evaluation grid.

    Analytical solutions are used when the problem has one; Burgers falls
    back to the finite-difference solver on a grid that contains the
    evaluation points.  Raises UsageError otherwise.
    """
    nx, nt = cfg["run"]["eval_nx"], cfg["run"]["eval_nt"]
    axes = evaluation_axes(problem, (nx, nt))
    if problem.analytical is not None:
        ref = problem.analytical if problem.n_space == 1 else _at_time(problem.analytical, problem.T)
        return ref, axes
    if problem.kind == "burgers":
        fd_nx = cfg["fd"]["nx"]
        if fd_nx % (nx - 1):
            raise UsageError(f"fd.nx = {fd_nx} must be a multiple of run.eval_nx - 1 = {nx - 1}")
        fd = burgers_fd_solve(problem.coefficients["nu"], fd_nx, T=problem.T, n_records=nt)
        stride = fd_nx // (nx - 1)
        return GridField(axes, fd.values[::stride, :], ("x", "t")), axes
    raise UsageError(f"no reference available for problem {problem.kind!r}")


def _write_report(model, problem, cfg, out):
    ref, axes = reference_for(problem, cfg)
    approx = model if problem.n_space == 1 else _at_time(model, problem.T)
    names = ("x", "t") if problem.n_space == 1 else ("x", "y")
    rep = error_report(approx, ref, axes, names)
    rep.to_csv(os.path.join(out, "report.csv"), fields_dir=out)
    return rep


# ---------------------------------------------------------------------------
# commands


def cmd_train(config, output_dir=None, budget=None, stream=None):
    stream = stream or sys.stdout
    cfg = load_config(config)
    if budget is not None:
        cfg.values["run"]["budget"] = int(budget)
        cfg.validate()
    out = _output_dir(output_dir, cfg)
    problem = cfg.problem()
    run = cfg["run"]
    netspec = cfg.network_spec()
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(cfg.to_ini())

    def progress(it, parts, th):
        if it % max(1, run["budget"] // 10) == 0:
            print(f"iter {it:6d}  loss {parts['total']:.6e}", file=stream, flush=True)

    params, hist = train(
        problem,
        netspec,
        cfg.optimizer_spec(),
        cfg.loss_spec(problem),
        run["budget"],
        run["seed"],
        snapshot_interval=run["snapshot_interval"],
        eval_shape=(run["eval_nx"], run["eval_nt"]),
        callback=progress,
        time_limit=run["time_limit"],
    )
    hist.to_csv(os.path.join(out, "history.csv"))
    hist.write_snapshots(out)
    save_params_csv(params, os.path.join(out, "params.csv"))
    model = build_model(params, problem, netspec)
    try:
        rep = _write_report(model, problem, cfg, out)
        print(f"rel_l2 {rep.rel_l2:.6e}  energy {rep.energy:.6e}  mse {rep.mse:.6e}", file=stream)
    except UsageError as err:
        # training succeeded; the report is simply unavailable
        print(f"note: {err}; report.csv not written", file=stream)
    return 0


def cmd_evaluate(params_path, config, output_dir=None, stream=None):
    stream = stream or sys.stdout
    cfg = load_config(config)
    problem = cfg.problem()
    netspec = cfg.network_spec()
    try:
        params = load_params_csv(params_path, netspec.activation)
    except OSError as err:
        raise UsageError(f"cannot read {params_path}: {err.strerror}") from None
    if params.layer_sizes != list(netspec.layers):
        raise UsageError(f"{params_path}: layers {params.layer_sizes} do not match network.layers {netspec.layers}")
    ref_check = reference_for(problem, cfg)  # fail before touching the output directory
    del ref_check
    out = _output_dir(output_dir, cfg)
    rep = _write_report(build_model(params, problem, netspec), problem, cfg, out)
    print(f"rel_l2 {rep.rel_l2:.6e}  energy {rep.energy:.6e}  mse {rep.mse:.6e}", file=stream)
    return 0


def cmd_fd(problem_kind, config=None, output_dir=None, stream=None, **flags):
    stream = stream or sys.stdout
    """Run a finite-difference solver; flags override the [fd] section."""
    if problem_kind not in ("heat2d", "burgers"):
        raise UsageError(f"fd supports heat2d and burgers, not {problem_kind!r}")
    n_in = 3 if problem_kind == "heat2d" else 2
    cfg = load_config(config) if config else RunConfig.from_string(
        f"[problem]\nkind = {problem_kind}\n[network]\nlayers = {n_in},1\n"
    )
    for key in ("alpha", "nu", "T"):
        if flags.get(key) is not None:
            cfg.values["problem"][key] = flags[key]
    if cfg["problem"]["kind"] != problem_kind:
        raise UsageError(f"config describes {cfg['problem']['kind']!r}, not {problem_kind!r}")
    for key in ("h", "dt", "steps", "record_every", "nx", "n_records"):
        if flags.get(key) is not None:
            cfg.values["fd"][key] = flags[key]
    cfg.validate()
    fd = cfg["fd"]
    problem = cfg.problem()
    out = _output_dir(output_dir, cfg)
    if problem_kind == "heat2d":
        dt = fd["dt"] if fd["dt"] is not None else 0.002
        fields = heat2d_fd_solve(problem, fd["h"], dt, fd["steps"], fd["record_every"])
        steps = [0] + [k for k in range(1, fd["steps"] + 1) if (fd["record_every"] and k % fd["record_every"] == 0) or k == fd["steps"]]
        for k, field in zip(steps, fields):
            t = k * dt
            name = f"heat2d_t{t:g}.csv"
            field.to_csv(os.path.join(out, name))
            print(f"wrote {name}  min {field.values.min():.6g}  max {field.values.max():.6g}", file=stream)
    else:
        field = burgers_fd_solve(problem.coefficients["nu"], fd["nx"], dt=fd["dt"], T=problem.T, n_records=fd["n_records"])
        field.to_csv(os.path.join(out, "burgers_fd.csv"))
        odd = float(np.max(np.abs(field.values + field.values[::-1, :])))
        print(f"wrote burgers_fd.csv  shape {field.shape}  odd-symmetry defect {odd:.3e}", file=stream)
    return 0


def field_image(field):
    """Values mapped linearly to [0, 1]; a constant field maps to 0.5."""
    if field.values.ndim != 2:
        raise UsageError(f"can only plot 2-D fields, got {field.values.ndim}-D")
    v = field.values
    finite = np.isfinite(v)
    lo, hi = (float(v[finite].min()), float(v[finite].max())) if finite.any() else (0.0, 0.0)
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.full(v.shape, 0.5)


def render_svg(field, path, xlabel="x", ylabel="t"):
    """Grayscale heatmap, min black and max white; constant fields are mid-gray."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    img = field_image(field)
    v = field.values
    finite = np.isfinite(v)
    lo, hi = (float(v[finite].min()), float(v[finite].max())) if finite.any() else (0.0, 0.0)
    (x0, x1), (y0, y1) = field.ranges
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.imshow(
        img.T, origin="lower", cmap="gray", vmin=0.0, vmax=1.0, aspect="auto",
        extent=(x0, x1, y0, y1), interpolation="nearest",
    )
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(f"min {lo:.4g}   max {hi:.4g}")
    # fixed hash salt and no date stamp: reruns give byte-identical files
    with matplotlib.rc_context({"svg.hashsalt": "pinnlab"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_plot(paths, config=None, output_dir=None, stream=None):
    stream = stream or sys.stdout
    cfg = load_config(config) if config else None
    labels = cfg["plot"] if cfg is not None else {"xlabel": "x", "ylabel": "t"}
    fields = []
    for p in paths:
        try:
            fields.append(GridField.from_csv(p, allow_nan=True))
        except OSError as err:
            raise UsageError(f"cannot read {p}: {err.strerror}") from None
    # SVGs go next to their CSVs unless an output directory is requested
    out = _output_dir(output_dir) if (output_dir or os.environ.get(ENV_OUTPUT)) else None
    for p, field in zip(paths, fields):
        stem = os.path.splitext(os.path.basename(p))[0] + ".svg"
        target = os.path.join(out if out else os.path.dirname(os.path.abspath(p)), stem)
        render_svg(field, target, labels["xlabel"], labels["ylabel"])
        print(f"wrote {target}", file=stream)
    return 0


# ---------------------------------------------------------------------------
# argument handling


def build_parser():
    ap = argparse.ArgumentParser(prog="pinnlab", description="PINN experiments, reference solves and reports.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a config file or preset")
    p.add_argument("config", help="INI file or preset name (" + ", ".join(preset_names()) + ")")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--budget", type=int, help="override run.budget")

    p = sub.add_parser("evaluate", help="error report of saved parameters")
    p.add_argument("params")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir")

    p = sub.add_parser("fd", help="finite-difference reference solve")
    p.add_argument("problem", choices=("heat2d", "burgers"))
    p.add_argument("--config")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--h", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--record-every", type=int)
    p.add_argument("--nx", type=int)
    p.add_argument("--n-records", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--T", type=float)

    p = sub.add_parser("plot", help="render GridField CSVs as SVG heatmaps")
    p.add_argument("csv", nargs="+")
    p.add_argument("--config")
    p.add_argument("-o", "--output-dir")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config, args.output_dir, args.budget)
        if args.command == "evaluate":
            return cmd_evaluate(args.params, args.config, args.output_dir)
        if args.command == "fd":
            flags = {k: getattr(args, k) for k in ("h", "dt", "steps", "record_every", "nx", "n_records", "alpha", "nu", "T")}
            return cmd_fd(args.problem, args.config, args.output_dir, **flags)
        return cmd_plot(args.csv, args.config, args.output_dir)
    except TrainingAborted as err:
        print(f"error: training aborted: non-finite loss at iteration {err.iteration}", file=sys.stderr)
        return 3
    except ConfigError as err:
        print(f"error: config key {err}", file=sys.stderr)
        return 2
    except (UsageError, StabilityError, StructureError, ValueError, NotImplementedError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
