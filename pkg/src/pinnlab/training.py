"""Physics-informed loss assembly and the training loop."""

import csv
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autodiff import Tape, Var, primal_value, reverse_gradient
from .network import ConstraintWrapper, NetworkParams, init_params, wrap_hard_constraints
from .optim import AdamState, LbfgsState, adam_step, lbfgs_direction, line_search
from .pde import GridField, input_derivatives, residual
from .sampling import (
    PartitionSchedule,
    gradient_weighted_sample,
    make_rng,
    progressive_sample,
    uniform_sample,
)

__all__ = [
    "LossSpec",
    "NetworkSpec",
    "OptimizerSpec",
    "TrainingHistory",
    "TrainingAborted",
    "Batches",
    "draw_batches",
    "build_model",
    "loss_terms",
    "pinn_loss",
    "loss_and_gradient",
    "train",
    "track_convergence",
    "evaluation_axes",
]


class TrainingAborted(ArithmeticError):
    """Loss became non-finite; carries the iteration and history so far."""

    def __init__(self, iteration, history, params=None):
        self.iteration = iteration
        self.history = history
        self.params = params
        super().__init__(f"non-finite loss at iteration {iteration}")


# ---------------------------------------------------------------------------
# loss, network and optimizer settings


@dataclass
class LossSpec:
    """What goes into the loss.

    ``two_term``: (1 - lambda) * data MSE + lambda * physics MSE.
    ``three_term``: IC, boundary and physics mean squares with per-term
    weights (unit by default).  With ``ic_velocity`` the IC term also
    penalizes u_t(x, 0) for problems that start at rest.
    """

    lambda_weight: float = 0.5
    term_mode: str = "three_term"
    data_points: Optional[tuple] = None
    n_physics: int = 10000
    n_ic: int = 1000
    n_bc: int = 1000
    strategy: str = "uniform"
    ic_velocity: bool = True
    weights: tuple = (1.0, 1.0, 1.0)
    schedule: Optional[PartitionSchedule] = None
    pilot_n: int = 1000
    resample_every: int = 1

    def validate(self):
        if not 0.0 <= self.lambda_weight <= 1.0:
            raise ValueError(f"lambda_weight must lie in [0, 1], got {self.lambda_weight}")
        if self.term_mode not in ("two_term", "three_term"):
            raise ValueError(f"unknown term_mode {self.term_mode!r}")
        if self.n_physics <= 0:
            raise ValueError("physics batch must be nonempty (n_physics > 0)")
        if self.term_mode == "two_term" and self.lambda_weight < 1.0:
            if self.data_points is None or len(self.data_points[0]) == 0:
                raise ValueError("two_term mode needs data_points unless lambda_weight = 1")
        if self.term_mode == "three_term" and (self.n_ic <= 0 or self.n_bc <= 0):
            raise ValueError("three_term mode needs n_ic > 0 and n_bc > 0")
        if self.strategy not in ("uniform", "progressive", "gradient_weighted"):
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        if self.strategy == "progressive" and self.schedule is None:
            raise ValueError("progressive sampling needs a schedule")
        if self.resample_every < 1:
            raise ValueError("resample_every must be at least 1")
        return self


@dataclass
class NetworkSpec:
    layers: list
    activation: str = "tanh"
    hard_constraints: bool = False
    time_power: Optional[int] = None


@dataclass
class OptimizerSpec:
    """``kind`` is lbfgs, adam, sgd, or adam_lbfgs (ADAM for
    ``adam_iters`` iterations, then L-BFGS)."""

    kind: str = "lbfgs"
    m: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    gamma: float = 1e-3
    adam_iters: int = 0
    loss_threshold: Optional[float] = None

    def validate(self):
        if self.kind not in ("lbfgs", "adam", "sgd", "adam_lbfgs"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line-search constants need 0 < c1 < c2 < 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        return self


# ---------------------------------------------------------------------------
# history


@dataclass
class TrainingHistory:
    """Per-iteration loss records plus periodic solution snapshots."""

    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    snapshot_interval: int = 50
    lambda_weight: float = 0.5
    term_mode: str = "three_term"
    wall_time: float = 0.0
    final: Optional[dict] = None  # loss at the returned parameters

    def append(self, it, data, physics, total, ic=0.0, bc=0.0):
        if self.records and it <= self.records[-1]["iter"]:
            raise ValueError("iterations must be strictly increasing")
        self.records.append(
            {"iter": int(it), "data_loss": data, "physics_loss": physics, "total": total, "ic": ic, "bc": bc}
        )

    def __len__(self):
        return len(self.records)

    def column(self, key):
        return np.array([r[key] for r in self.records])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iter,data_loss,physics_loss,total_loss\n")
            for r in self.records:
                fh.write("%d,%.17g,%.17g,%.17g\n" % (r["iter"], r["data_loss"], r["physics_loss"], r["total"]))

    @classmethod
    def from_csv(cls, path):
        h = cls()
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["iter", "data_loss", "physics_loss", "total_loss"]:
            raise ValueError(f"{path}: bad history header")
        for r in rows[1:]:
            h.append(int(r[0]), float(r[1]), float(r[2]), float(r[3]))
        return h

    def write_snapshots(self, directory):
        import os

        for it, g in sorted(self.snapshots.items()):
            g.to_csv(os.path.join(directory, f"snap_{it}.csv"))


# ---------------------------------------------------------------------------
# batches and the loss


@dataclass
class Batches:
    physics: np.ndarray
    ic: Optional[np.ndarray] = None
    bc: Optional[np.ndarray] = None
    bc_values: Optional[np.ndarray] = None
    stage: int = 0


def ic_points(problem, n):
    """Equidistant points on the initial slice (t = 0), t column last."""
    d = problem.n_space
    per = max(int(round(n ** (1.0 / d))), 2)
    axes = [np.linspace(lo, hi, n if d == 1 else per) for lo, hi in problem.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh] + [np.zeros(mesh[0].size)])
    return pts


def bc_points(problem, n, rng):
    """Uniform random points on the spatial faces, with their Dirichlet values."""
    faces = problem.faces()
    dom = np.asarray(problem.domain)
    pts = dom[:, 0] + (dom[:, 1] - dom[:, 0]) * rng.random((n, len(dom)))
    which = rng.integers(0, len(faces), n)
    vals = np.empty(n)
    for f, (axis, side, value) in enumerate(faces):
        sel = which == f
        pts[sel, axis] = side
        vals[sel] = value
    return pts, vals


def draw_batches(problem, spec, seed, iteration, model=None):
    """Collocation sets for one iteration; a pure function of its arguments."""
    key = iteration - iteration % spec.resample_every
    rng_seed = (seed, 1, key)
    stage = 0
    if spec.strategy == "uniform":
        phys = uniform_sample(problem.domain, spec.n_physics, make_rng(*rng_seed).integers(2**63)).points
    elif spec.strategy == "progressive":
        stage = spec.schedule.stage_at(iteration)
        phys = progressive_sample(spec.schedule, stage, spec.n_physics, make_rng(*rng_seed).integers(2**63)).points
    else:
        if model is None:
            raise ValueError("gradient-weighted sampling needs the current model")
        phys = gradient_weighted_sample(
            model, problem.domain, spec.n_physics, int(make_rng(*rng_seed).integers(2**63)), spec.pilot_n
        ).points
    b = Batches(phys, stage=stage)
    if spec.term_mode == "three_term":
        b.ic = ic_points(problem, spec.n_ic)
        b.bc, b.bc_values = bc_points(problem, spec.n_bc, make_rng(seed, 2, key))
    return b


def build_model(params, problem, netspec):
    """The evaluator actually trained: bare network or constraint wrapper."""
    if netspec is not None and netspec.hard_constraints:
        return wrap_hard_constraints(params, problem, netspec.time_power)
    return params


def _cols(pts):
    return [pts[:, k : k + 1] for k in range(pts.shape[1])]


def _msq(r):
    if isinstance(r, Var):
        return (r * r).mean()
    r = primal_value(r)
    return float(np.mean(np.square(r)))


def loss_terms(model, problem, spec, batches):
    """Individual loss terms (tape variables when the model's parameters are)."""
    t = {}
    phys = residual(problem, model, *_cols(batches.physics))
    t["physics"] = _msq(phys)
    if spec.term_mode == "three_term":
        cols = _cols(batches.ic)
        target = problem.ic(*cols[:-1])
        if problem.zero_initial_velocity and spec.ic_velocity:
            u, u_t = input_derivatives(model, cols, problem.n_space, order=1)
            ic = _msq(u - target) + _msq(u_t)
        else:
            ic = _msq(model(*cols) - target)
        t["ic"] = ic
        t["bc"] = _msq(model(*_cols(batches.bc)) - batches.bc_values[:, None])
    else:
        if spec.lambda_weight < 1.0:
            coords, values = spec.data_points
            coords = np.asarray(coords, dtype=float)
            values = np.asarray(values, dtype=float).reshape(-1, 1)
            t["data"] = _msq(model(*_cols(coords)) - values)
        else:
            t["data"] = 0.0
    return t


def _combine(terms, spec):
    if spec.term_mode == "three_term":
        w_ic, w_bc, w_p = spec.weights
        total = w_ic * terms["ic"] + w_bc * terms["bc"] + w_p * terms["physics"]
    else:
        lam = spec.lambda_weight
        total = (1.0 - lam) * terms["data"] + lam * terms["physics"]
    return total


def _parts(terms, spec, total):
    val = lambda v: float(primal_value(v))  # noqa: E731
    phys = val(terms["physics"])
    if spec.term_mode == "three_term":
        ic, bc = val(terms["ic"]), val(terms["bc"])
        return {"total": val(total), "data": ic + bc, "physics": phys, "ic": ic, "bc": bc}
    return {"total": val(total), "data": val(terms["data"]), "physics": phys, "ic": 0.0, "bc": 0.0}


def loss_and_gradient(params, problem, spec, batches, netspec=None):
    """Loss parts and the flat parameter gradient from one reverse sweep."""
    tape = Tape()
    lifted = params.lift(tape)
    terms = loss_terms(build_model(lifted, problem, netspec), problem, spec, batches)
    total = _combine(terms, spec)
    parts = _parts(terms, spec, total)
    if isinstance(total, Var):
        g = reverse_gradient(tape, total).flat()
    else:
        g = np.zeros(params.param_count())
    return parts, g


def pinn_loss(params, spec, problem, seed, iteration=0, netspec=None):
    """(total, data_part, physics_part) on the batches drawn for ``iteration``."""
    spec.validate()
    model = build_model(params, problem, netspec)
    batches = draw_batches(problem, spec, seed, iteration, model)
    terms = loss_terms(model, problem, spec, batches)
    p = _parts(terms, spec, _combine(terms, spec))
    return p["total"], p["data"], p["physics"]


# ---------------------------------------------------------------------------
# evaluation grid and snapshots


def evaluation_axes(problem, shape=(200, 400)):
    """Equidistant evaluation axes.

    One spatial dimension: (x, t) over the full space-time box.  Two
    spatial dimensions: (x, y) at the final time.
    """
    if problem.n_space == 1:
        (lo, hi), (t0, t1) = problem.domain
        return np.linspace(lo, hi, shape[0]), np.linspace(t0, t1, shape[1])
    (x0, x1), (y0, y1) = problem.bounds[:2]
    return np.linspace(x0, x1, shape[0]), np.linspace(y0, y1, shape[1])


def snapshot(model, problem, shape=(200, 400)):
    axes = evaluation_axes(problem, shape)
    if problem.n_space == 1:
        f = model
    else:
        f = lambda x, y: model(x, y, np.full_like(x, problem.T))  # noqa: E731
    return GridField.from_function(f, axes, problem.axis_names[:1] + ("t",) if problem.n_space == 1 else ("x", "y"))


# ---------------------------------------------------------------------------
# the loop


def train(
    problem,
    network_spec,
    optimizer_spec,
    loss_spec,
    budget,
    seed,
    snapshot_interval=50,
    eval_shape=(200, 400),
    params=None,
    callback=None,
    time_limit=None,
):
    """Run the configured optimizer for ``budget`` iterations.

    Every iteration draws its collocation batch from (seed, iteration), so
    two runs with the same seed produce identical histories.  Snapshots of
    the model on the evaluation grid are stored at iterations 0, k, 2k, ...
    and at the end.  ``time_limit`` (seconds) optionally stops early.
    """
    if not isinstance(budget, (int, np.integer)) or budget <= 0:
        raise ValueError("budget must be a positive number of iterations")
    loss_spec.validate()
    optimizer_spec.validate()
    if params is None:
        params = init_params(network_spec.layers, network_spec.activation, seed)
    hist = TrainingHistory(
        snapshot_interval=snapshot_interval, lambda_weight=loss_spec.lambda_weight, term_mode=loss_spec.term_mode
    )
    theta = params.flatten()
    template = params
    t_start = time.perf_counter()

    def model_of(th):
        return build_model(template.unflatten(th), problem, network_spec)

    def evaluate(th, batches):
        parts, g = loss_and_gradient(template.unflatten(th), problem, loss_spec, batches, network_spec)
        return parts, g

    def check(parts, g, it, th):
        if not (np.isfinite(parts["total"]) and np.all(np.isfinite(g))):
            raise TrainingAborted(it, hist, template.unflatten(th))

    def record(it, parts, th):
        hist.append(it, parts["data"], parts["physics"], parts["total"], parts["ic"], parts["bc"])
        if snapshot_interval and it % snapshot_interval == 0:
            hist.snapshots[it] = snapshot(model_of(th), problem, eval_shape)
        if callback is not None:
            callback(it, parts, th)

    kind = optimizer_spec.kind
    adam = AdamState.zeros(
        theta.size,
        alpha=optimizer_spec.alpha,
        beta1=optimizer_spec.beta1,
        beta2=optimizer_spec.beta2,
        delta=optimizer_spec.delta,
    )
    lbfgs = LbfgsState(m=optimizer_spec.m, c1=optimizer_spec.c1, c2=optimizer_spec.c2)
    cached = None  # (batch key, parts, grad) valid for the current theta
    it = 0
    for it in range(budget):
        key = it - it % loss_spec.resample_every
        batches = draw_batches(
            problem, loss_spec, seed, it, model_of(theta) if loss_spec.strategy == "gradient_weighted" else None
        )
        if cached is not None and cached[0] == key and loss_spec.strategy != "gradient_weighted":
            parts, g = cached[1], cached[2]
        else:
            parts, g = evaluate(theta, batches)
        check(parts, g, it, theta)
        record(it, parts, theta)
        cached = None
        if optimizer_spec.loss_threshold is not None and parts["total"] <= optimizer_spec.loss_threshold:
            break
        use_adam = kind == "adam" or (kind == "adam_lbfgs" and it < optimizer_spec.adam_iters)
        if kind == "sgd":
            theta = theta - optimizer_spec.gamma * g
        elif use_adam:
            theta, adam = adam_step(adam, theta, g)
        else:
            seen = {}

            def fg(th):
                parts_, g_ = evaluate(th, batches)
                seen[th.tobytes()] = parts_
                return parts_["total"], g_

            p = lbfgs_direction(lbfgs, g)
            if not float(p @ g) < 0:
                lbfgs.history.clear()
                p = -g
            if not float(p @ g) < 0:
                break  # zero gradient: stationary
            res = line_search(fg, theta, p, lbfgs.c1, lbfgs.c2, f0=parts["total"], g0=g)
            s = res.alpha * p
            if not res.converged and res.message == "halvings exhausted":
                lbfgs.history.clear()
            else:
                lbfgs.add_pair(s, res.grad - g)
            theta = theta + s
            if theta.tobytes() in seen:
                cached = (key, seen[theta.tobytes()], res.grad)
        if time_limit is not None and time.perf_counter() - t_start > time_limit:
            it += 1
            break
    else:
        it = budget
    final = template.unflatten(theta)
    # loss at the final iterate; kept apart so history rows == iterations run
    batches = draw_batches(problem, loss_spec, seed, it, model_of(theta) if loss_spec.strategy == "gradient_weighted" else None)
    parts, g = evaluate(theta, batches)
    check(parts, g, it, theta)
    hist.final = dict(iter=it, data=parts["data"], physics=parts["physics"], total=parts["total"])
    if snapshot_interval:
        hist.snapshots[it] = snapshot(model_of(theta), problem, eval_shape)
    hist.wall_time = time.perf_counter() - t_start
    return final, hist


def track_convergence(history, reference, problem=None, shape=None):
    """Relative L2 error of every snapshot against ``reference``.

    ``reference`` is an evaluator over the snapshot grid columns or a
    GridField congruent with the snapshots.
    """
    if reference is None:
        raise NotImplementedError("no analytical reference available for this problem")
    if not history.snapshots:
        raise ValueError("history holds no snapshots")
    from .metrics import rel_l2_error

    out = []
    ref_cache = None
    for it, snap in sorted(history.snapshots.items()):
        if isinstance(reference, GridField):
            ref = reference.values
        else:
            if ref_cache is None or ref_cache[0] != snap.shape:
                ref_cache = (snap.shape, GridField.from_function(reference, snap.axes).values)
            ref = ref_cache[1]
        out.append((it, rel_l2_error(ref.ravel(), snap.values.ravel())))
    return out
