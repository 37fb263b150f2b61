"""Dense feed-forward networks and hard-constraint wrappers."""

import csv
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .autodiff import Dual, Jet, StructureError, Tape, Var, _shape, reverse_gradient, softplus, tanh

ACTIVATIONS = ("tanh", "softplus", "identity")


class UnsupportedConstraintError(ValueError):
    """The problem cannot be encoded into the approximator."""


def _activate(z, kind):
    if kind == "tanh":
        return tanh(z)
    if kind == "softplus":
        return softplus(z)
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class NetworkParams:
    """Weights ``W[l]`` (fan_out x fan_in) and biases ``b[l]`` per layer.

    Entries are usually numpy arrays but may be tape variables or duals while
    differentiating; the forward pass is written once for all of them.
    Calling an instance evaluates the network on column inputs.
    """

    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise StructureError("need one bias per weight matrix and at least one layer")
        for l in range(1, len(self.weights)):
            if _shape(self.weights[l])[1] != _shape(self.weights[l - 1])[0]:
                raise StructureError(
                    f"layer {l}: fan-in {_shape(self.weights[l])[1]} does not match "
                    f"previous fan-out {_shape(self.weights[l - 1])[0]}"
                )

    @property
    def layer_sizes(self):
        sizes = [_shape(self.weights[0])[1]]
        sizes += [_shape(w)[0] for w in self.weights]
        return sizes

    @property
    def n_in(self):
        return self.layer_sizes[0]

    def param_count(self):
        return param_count(self.layer_sizes)

    def flatten(self):
        """Parameters as one vector: W1, b1, W2, b2, ... (row-major)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ravel(w))
            parts.append(np.ravel(b))
        return np.concatenate(parts).astype(float)

    def unflatten(self, theta):
        """New params with the same architecture and values from ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.param_count():
            raise StructureError(f"expected {self.param_count()} parameters, got {theta.size}")
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws_shape, bs_shape = _shape(w), _shape(b)
            n = int(np.prod(ws_shape))
            ws.append(theta[k : k + n].reshape(ws_shape))
            k += n
            n = int(np.prod(bs_shape))
            bs.append(theta[k : k + n].reshape(bs_shape))
            k += n
        return NetworkParams(ws, bs, self.activation)

    def lift(self, tape):
        """Register every weight and bias as a tape input (flatten order)."""
        ws, bs = [], []
        for w, b in zip(self.weights, self.biases):
            ws.append(tape.variable(np.asarray(w, dtype=float)))
            bs.append(tape.variable(np.asarray(b, dtype=float)))
        return NetworkParams(ws, bs, self.activation)

    def __call__(self, *cols):
        return forward(self, cols)


def _assemble(cols, n_in):
    """Stack column inputs of shape (N, 1) into an (N, n_in) design matrix.

    Built from broadcast products with one-hot rows so it works for duals
    and tape variables as well as arrays.
    """
    if len(cols) != n_in:
        raise StructureError(f"layer 0: expected {n_in} input columns, got {len(cols)}")
    out = None
    for k, c in enumerate(cols):
        if not isinstance(c, (Dual, Var, Jet)):
            c = np.reshape(np.asarray(c, dtype=float), (-1, 1))
        e = np.zeros((1, n_in))
        e[0, k] = 1.0
        term = c * e
        out = term if out is None else out + term
    return out


def forward(params, inputs):
    """Evaluate the network.

    ``inputs`` is either an array of shape (n_in,) or (N, n_in), or a
    sequence of ``n_in`` column components each shaped (N, 1) (these may be
    duals or tape variables).  Hidden layers use the configured activation;
    the final layer is linear.  Returns shape (N, n_out), or (n_out,) for a
    single input vector.
    """
    n_in = params.n_in
    single = False
    if isinstance(inputs, np.ndarray):
        x = inputs
        if x.ndim == 1:
            single = True
            x = x.reshape(1, -1)
        if x.shape[-1] != n_in:
            raise StructureError(f"layer 0: input width {x.shape[-1]} does not match fan-in {n_in}")
        a = x
    else:
        a = _assemble(list(inputs), n_in)
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        fan_in = _shape(w)[1]
        if _shape(a)[-1] != fan_in:
            raise StructureError(f"layer {l}: input width {_shape(a)[-1]} does not match fan-in {fan_in}")
        z = a @ w.T + b
        a = z if l == last else _activate(z, params.activation)
    if single:
        return a[0]
    return a


def param_count(layer_sizes):
    """Trainable parameter count of a dense network with these layer widths."""
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise StructureError("need at least input and output sizes")
    if any(int(s) != s or s < 1 for s in sizes):
        raise StructureError(f"layer sizes must be positive integers: {sizes}")
    return int(sum(sizes[l] * sizes[l - 1] + sizes[l] for l in range(1, len(sizes))))


def init_params(layer_sizes, activation="tanh", seed=0):
    """Glorot-uniform weights, zero biases, Philox counter-based stream."""
    param_count(layer_sizes)
    rng = np.random.Generator(np.random.Philox(seed))
    ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return NetworkParams(ws, bs, activation)


def output_param_gradient(params, x, mode="reverse"):
    """Gradient of sum(network(x)) with respect to the flattened parameters.

    ``mode="reverse"`` uses one tape sweep; ``mode="forward"`` pushes one
    dual direction per parameter through a single forward pass.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if mode == "reverse":
        tape = Tape()
        lifted = params.lift(tape)
        out = forward(lifted, x).sum()
        return reverse_gradient(tape, out).flat()
    if mode != "forward":
        raise ValueError(f"unknown mode {mode!r}")
    n = params.param_count()
    eye = np.eye(n)
    ws, bs, k = [], [], 0
    for w, b in zip(params.weights, params.biases):
        m = w.size
        ws.append(Dual(w, eye[:, k : k + m].reshape((n,) + w.shape)))
        k += m
        m = b.size
        # bias as a (1, m) row so direction axes broadcast against the batch
        bs.append(Dual(b.reshape(1, -1), eye[:, k : k + m].reshape(n, 1, m)))
        k += m
    out = forward(NetworkParams(ws, bs, params.activation), x)
    return np.asarray(out.tangent).reshape(n, -1).sum(axis=1)


@dataclass
class ConstraintWrapper:
    """``U = boundary_factor * time_factor * base + ic_value``.

    The spatial factor vanishes on the boundary and the time factor at t=0,
    so initial and homogeneous Dirichlet conditions hold by construction.
    Inputs are spatial columns followed by time.
    """

    base: NetworkParams
    ic_value: Callable
    boundary_factor: Callable
    time_factor: Callable

    def with_base(self, base):
        return replace(self, base=base)

    def __call__(self, *cols):
        *space, t = cols
        return self.boundary_factor(*space) * self.time_factor(t) * self.base(*cols) + self.ic_value(*space)


def box_boundary_factor(bounds):
    """Product over spatial axes of (x - lo)(hi - x); zero on every face."""

    def factor(*space):
        out = 1.0
        for x, (lo, hi) in zip(space, bounds):
            out = out * ((x - lo) * (hi - x))
        return out

    return factor


def wrap_hard_constraints(base, problem, time_power=None):
    """Encode a problem's IC and homogeneous Dirichlet BC into the network.

    ``time_power`` defaults to 2 for problems whose initial velocity is zero
    (so the wrapped time derivative also vanishes at t=0), otherwise 1.
    """
    if problem.ic is None:
        raise UnsupportedConstraintError(f"{problem.kind}: no closed-form initial condition")
    if not problem.homogeneous_dirichlet:
        raise UnsupportedConstraintError(
            f"{problem.kind}: boundary values are not homogeneous Dirichlet"
        )
    if time_power is None:
        time_power = 2 if problem.zero_initial_velocity else 1
    if time_power == 1:
        time_factor = lambda t: t  # noqa: E731
    elif time_power == 2:
        time_factor = lambda t: t * t  # noqa: E731
    else:
        raise ValueError("time_power must be 1 or 2")
    return ConstraintWrapper(base, problem.ic, box_boundary_factor(problem.bounds), time_factor)


def save_params_csv(params, path):
    """Write layer,row,col,value rows; biases use col = -1."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "row", "col", "value"])
        for l, (W, b) in enumerate(zip(params.weights, params.biases)):
            W = np.asarray(W)
            for i in range(W.shape[0]):
                for j in range(W.shape[1]):
                    w.writerow([l, i, j, "%.17g" % W[i, j]])
            for i, v in enumerate(np.ravel(b)):
                w.writerow([l, i, -1, "%.17g" % v])


def load_params_csv(path, activation="tanh"):
    """Inverse of :func:`save_params_csv`; rejects incomplete files."""
    entries = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["layer", "row", "col", "value"]:
        raise StructureError(f"{path}: missing 'layer,row,col,value' header")
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise StructureError(f"{path}:{n}: expected 4 fields, got {len(row)}")
        try:
            l, i, j, v = int(row[0]), int(row[1]), int(row[2]), float(row[3])
        except ValueError as err:
            raise StructureError(f"{path}:{n}: {err}") from None
        entries[(l, i, j)] = v
    if not entries:
        raise StructureError(f"{path}: no parameters")
    n_layers = max(k[0] for k in entries) + 1
    ws, bs = [], []
    for l in range(n_layers):
        keys = [k for k in entries if k[0] == l]
        wkeys = [k for k in keys if k[2] >= 0]
        bkeys = [k for k in keys if k[2] < 0]
        if not wkeys or not bkeys:
            raise StructureError(f"{path}: layer {l} incomplete")
        rows_, cols_ = max(k[1] for k in wkeys) + 1, max(k[2] for k in wkeys) + 1
        if len(wkeys) != rows_ * cols_ or len(bkeys) != rows_:
            raise StructureError(f"{path}: layer {l} incomplete")
        W = np.empty((rows_, cols_))
        for (_, i, j) in wkeys:
            W[i, j] = entries[(l, i, j)]
        b = np.empty(rows_)
        for (_, i, _j) in bkeys:
            b[i] = entries[(l, i, -1)]
        ws.append(W)
        bs.append(b)
    return NetworkParams(ws, bs, activation)
