"""PDE problems, residual operators, series solutions and FD reference solvers."""

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import Dual, Jet, Var, cos, primal_value, seed_jet, sin

__all__ = [
    "PdeProblem",
    "GridField",
    "StabilityError",
    "wave1d_problem",
    "burgers_problem",
    "heat2d_problem",
    "membrane_problem",
    "make_problem",
    "input_derivatives",
    "input_jets",
    "wave1d_residual",
    "burgers_residual",
    "heat2d_residual",
    "membrane_residual",
    "residual",
    "wave1d_coefficient",
    "wave1d_series",
    "membrane_series",
    "heat2d_step",
    "heat2d_fd_solve",
    "burgers_fd_solve",
]


class StabilityError(ValueError):
    """Time step violates the explicit scheme's stability bound."""


# ---------------------------------------------------------------------------
# problem description


@dataclass
class PdeProblem:
    """Everything a trainer needs to know about one PDE.

    ``bounds`` holds spatial intervals in axis order; time is always the
    last input and runs over ``[0, T]``.  ``ic`` and ``analytical`` take
    column arrays (or duals) and must be written with the generic ops from
    :mod:`pinnlab.autodiff` so hard constraints can differentiate them.
    ``bc`` maps face labels such as ``"x=0"`` to Dirichlet values.
    """

    kind: str
    coefficients: dict
    bounds: list
    T: float
    ic: Optional[Callable] = None
    bc: dict = field(default_factory=dict)
    analytical: Optional[Callable] = None
    zero_initial_velocity: bool = False
    axis_names: tuple = ()

    def __post_init__(self):
        if self.kind not in ("wave1d", "burgers", "heat2d", "membrane2d"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"bounds must satisfy lo < hi, got [{lo}, {hi}]")
        if not self.T > 0:
            raise ValueError("time horizon T must be positive")
        for k, v in self.coefficients.items():
            if not v > 0:
                raise ValueError(f"coefficient {k} must be positive, got {v}")
        if not self.axis_names:
            names = ("x", "y", "z")[: len(self.bounds)]
            self.axis_names = tuple(names) + ("t",)

    @property
    def n_space(self):
        return len(self.bounds)

    @property
    def n_in(self):
        return len(self.bounds) + 1

    @property
    def domain(self):
        """All input intervals, time last."""
        return [tuple(b) for b in self.bounds] + [(0.0, float(self.T))]

    @property
    def homogeneous_dirichlet(self):
        return bool(self.bc) and all(v == 0 for v in self.bc.values())

    def faces(self):
        """(axis, side value, boundary value) for every spatial face."""
        out = []
        for k, (lo, hi) in enumerate(self.bounds):
            name = self.axis_names[k]
            out.append((k, lo, self.bc[f"{name}={_fmt(lo)}"]))
            out.append((k, hi, self.bc[f"{name}={_fmt(hi)}"]))
        return out

    def residual(self, net, *cols):
        return residual(self, net, *cols)


def _fmt(v):
    return f"{v:g}"


def _face_bc(names, bounds, values):
    out = {}
    it = iter(values)
    for name, (lo, hi) in zip(names, bounds):
        out[f"{name}={_fmt(lo)}"] = next(it)
        out[f"{name}={_fmt(hi)}"] = next(it)
    return out


def wave1d_problem(c=1.0, n_terms=1000):
    """u_tt = c^2 u_xx on [0,2] x [0,4], u(x,0) = x(2-x), u_t(x,0) = 0."""
    bounds = [(0.0, 2.0)]
    analytical = None
    if c == 1.0:
        analytical = lambda x, t: wave1d_series(x, t, n_terms)  # noqa: E731
    return PdeProblem(
        "wave1d",
        {"c": float(c)},
        bounds,
        4.0,
        ic=lambda x: x * (2.0 - x),
        bc=_face_bc("x", bounds, (0.0, 0.0)),
        analytical=analytical,
        zero_initial_velocity=True,
    )


def burgers_problem(nu=0.01 / np.pi):
    """u_t + u u_x = nu u_xx on [-1,1] x [0,1], u(x,0) = -sin(pi x)."""
    bounds = [(-1.0, 1.0)]
    return PdeProblem(
        "burgers",
        {"nu": float(nu)},
        bounds,
        1.0,
        ic=lambda x: -sin(np.pi * x),
        bc=_face_bc("x", bounds, (0.0, 0.0)),
    )


def heat2d_problem(alpha=1.28e-4, T=20.0, bc=(100.0, 25.0, 200.0, 0.0), ic=50.0):
    """Heated plate on the unit square; faces ordered x=0, x=1, y=0, y=1."""
    bounds = [(0.0, 1.0), (0.0, 1.0)]
    ic = float(ic)
    return PdeProblem(
        "heat2d",
        {"alpha": float(alpha)},
        bounds,
        float(T),
        ic=lambda x, y: 0.0 * x + ic,
        bc=_face_bc("xy", bounds, [float(v) for v in bc]),
    )


def membrane_problem(T=1.0, n_terms=100):
    """u_tt = 36 (u_xx + u_yy) on [0,2] x [0,3], u(x,y,0) = xy(2-x)(3-y)."""
    bounds = [(0.0, 2.0), (0.0, 3.0)]
    return PdeProblem(
        "membrane2d",
        {"c": 6.0},
        bounds,
        float(T),
        ic=lambda x, y: x * y * (2.0 - x) * (3.0 - y),
        bc=_face_bc("xy", bounds, (0.0, 0.0, 0.0, 0.0)),
        analytical=lambda x, y, t: membrane_series(x, y, t, n_terms),
        zero_initial_velocity=True,
    )


def make_problem(kind, **coefficients):
    """Build a problem by name; keyword coefficients override defaults."""
    factories = {
        "wave1d": wave1d_problem,
        "burgers": burgers_problem,
        "heat2d": heat2d_problem,
        "membrane2d": membrane_problem,
        "membrane": membrane_problem,
    }
    if kind not in factories:
        raise ValueError(f"unknown problem kind {kind!r}")
    return factories[kind](**coefficients)


# ---------------------------------------------------------------------------
# grid fields


@dataclass
class GridField:
    """Values sampled on a tensor-product grid, row-major with axis 0 outermost."""

    axes: tuple
    values: np.ndarray
    names: tuple = ()
    allow_nan: bool = False

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        shape = tuple(len(a) for a in self.axes)
        if self.values.size != int(np.prod(shape)):
            raise ValueError(f"{self.values.size} values do not fill a grid of shape {shape}")
        self.values = self.values.reshape(shape)
        if self.allow_nan:
            bad = np.isinf(self.values)
        else:
            bad = ~np.isfinite(self.values)
        if np.any(bad):
            raise ValueError("grid values must be finite")
        if not self.names:
            self.names = tuple(f"axis{k}" for k in range(len(self.axes)))

    @property
    def shape(self):
        return self.values.shape

    @property
    def ranges(self):
        return [(float(a[0]), float(a[-1])) for a in self.axes]

    @classmethod
    def from_function(cls, f, axes, names=()):
        """Evaluate ``f(*columns)`` on the tensor grid of ``axes``."""
        mesh = np.meshgrid(*axes, indexing="ij")
        cols = [m.reshape(-1, 1) for m in mesh]
        vals = np.asarray(primal_value(f(*cols)), dtype=float)
        return cls(tuple(axes), vals.reshape(mesh[0].shape), names)

    def points(self):
        """(N, ndim) array of grid coordinates in row-major order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def congruent(self, other):
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.axes, other.axes)
        )

    def to_csv(self, path):
        """Header ``axis0,axis1,...,value``; 17 significant digits."""
        pts = self.points()
        vals = self.values.ravel()
        header = ",".join([f"axis{k}" for k in range(len(self.axes))] + ["value"])
        np.savetxt(path, np.column_stack([pts, vals]), fmt="%.17g", delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path, allow_nan=False):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise ValueError(f"{path}: empty grid file")
        header = rows[0]
        nd = len(header) - 1
        if nd < 1 or header != [f"axis{k}" for k in range(nd)] + ["value"]:
            raise ValueError(f"{path}: bad header {header}")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:]])
        except ValueError as err:
            raise ValueError(f"{path}: {err}") from None
        if data.ndim != 2 or data.shape[1] != nd + 1:
            raise ValueError(f"{path}: ragged rows")
        axes = [np.unique(data[:, k]) for k in range(nd)]
        shape = tuple(len(a) for a in axes)
        if int(np.prod(shape)) != len(data):
            raise ValueError(f"{path}: rows do not form a full grid")
        # rows are row-major already; keep the file order for the values
        return cls(tuple(axes), data[:, nd].reshape(shape), allow_nan=allow_nan)


# ---------------------------------------------------------------------------
# residuals


def _col(x):
    if isinstance(x, (Dual, Var, Jet)):
        return x
    return np.reshape(np.asarray(x, dtype=float), (-1, 1))


def input_derivatives(net, cols, axis, order=2):
    """Value and derivatives of ``net`` along one input axis.

    Returns ``(u, u_a)`` for ``order=1`` and ``(u, u_a, u_aa)`` for
    ``order=2``, obtained by seeding that input with a (nested) dual.
    The network parameters may be tape variables; the outputs then are too.
    """
    cols = [_col(c) for c in cols]
    c = cols[axis]
    one = np.ones_like(primal_value(c))
    if order == 1:
        seeded = Dual(c, one)
    elif order == 2:
        seeded = Dual(Dual(c, one), Dual(one, 0.0))
    else:
        raise ValueError("order must be 1 or 2")
    cols[axis] = seeded
    out = net(*cols)
    if not isinstance(out, Dual):
        # output does not depend on the seeded input
        zero = 0.0 * out
        return (out, zero) if order == 1 else (out, zero, zero)
    if order == 1:
        return out.primal, out.tangent
    inner, outer = out.primal, out.tangent
    if not isinstance(inner, Dual):
        inner = Dual(inner, 0.0 * inner)
    if not isinstance(outer, Dual):
        outer = Dual(outer, 0.0 * outer)
    return inner.primal, inner.tangent, outer.tangent


def _component(d, k, K):
    if isinstance(d, Var):
        # tape variables have no indexing op; contract with a one-hot instead
        e = np.zeros((K,) + (1,) * (d.ndim - 1))
        e[k] = 1.0
        return (d * e).sum(axis=0)
    return d[k]


def input_jets(net, cols, axes):
    """Value, first and unmixed second derivatives along several inputs.

    A single jet pass; returns ``(u, [u_a ...], [u_aa ...])`` in the order
    of ``axes``.
    """
    cols = [np.asarray(primal_value(c), dtype=float).reshape(-1, 1) for c in cols]
    out = net(*seed_jet(cols, axes))
    K = len(axes)
    if not isinstance(out, Jet):
        z = np.zeros_like(cols[0])
        return out, [z] * K, [z] * K
    return out.v, [_component(out.d1, k, K) for k in range(K)], [_component(out.d2, k, K) for k in range(K)]


def wave1d_residual(net, x, t, c=1.0):
    """Lambda_tt - c^2 Lambda_xx."""
    _, _, (u_xx, u_tt) = input_jets(net, (x, t), (0, 1))
    return u_tt - (c * c) * u_xx


def burgers_residual(net, x, t, nu):
    """Lambda_t + Lambda Lambda_x - nu Lambda_xx."""
    u, (u_x, u_t), (u_xx, _) = input_jets(net, (x, t), (0, 1))
    return u_t + u * u_x - nu * u_xx


def heat2d_residual(net, x, y, t, alpha_diff):
    """Lambda_t - alpha (Lambda_xx + Lambda_yy)."""
    _, (_, _, u_t), (u_xx, u_yy, _) = input_jets(net, (x, y, t), (0, 1, 2))
    return u_t - alpha_diff * (u_xx + u_yy)


def membrane_residual(net, x, y, t):
    """Lambda_tt - 36 (Lambda_xx + Lambda_yy)."""
    _, _, (u_xx, u_yy, u_tt) = input_jets(net, (x, y, t), (0, 1, 2))
    return u_tt - 36.0 * (u_xx + u_yy)


def residual(problem, net, *cols):
    """Dispatch to the residual operator of ``problem``."""
    k = problem.kind
    if k == "wave1d":
        return wave1d_residual(net, *cols, c=problem.coefficients["c"])
    if k == "burgers":
        return burgers_residual(net, *cols, nu=problem.coefficients["nu"])
    if k == "heat2d":
        return heat2d_residual(net, *cols, alpha_diff=problem.coefficients["alpha"])
    return membrane_residual(net, *cols)


# ---------------------------------------------------------------------------
# series solutions


def wave1d_coefficient(n):
    """alpha_n = -(8 pi n sin(pi n) + 16 cos(pi n) - 16) / (pi^3 n^3)."""
    n = np.asarray(n, dtype=float)
    pn = np.pi * n
    return -(8.0 * pn * np.sin(pn) + 16.0 * np.cos(pn) - 16.0) / (np.pi**3 * n**3)


def _is_plain(*xs):
    return not any(isinstance(x, (Dual, Var, Jet)) for x in xs)


def _first_order(*xs):
    """True when every input is an array or a dual over plain arrays."""
    return all(
        not isinstance(v, (Dual, Var, Jet))
        or (isinstance(v, Dual) and _is_plain(v.primal, v.tangent))
        for v in xs
    )


def _chain_dual(value, partials):
    """Dual(value, sum of partial * input tangent)."""
    tan = 0.0
    for d, v in partials:
        if isinstance(v, Dual):
            tan = tan + d * v.tangent
    return Dual(value, tan)


def wave1d_series(x, t, n_terms=1000, chunk=4096):
    """Partial sum of alpha_n cos(n pi t / 2) sin(n pi x / 2).

    Accepts scalars, arrays, or (column) duals.  The array path is chunked
    so large evaluation grids stay within memory.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    n = np.arange(1, n_terms + 1, dtype=float)
    a = wave1d_coefficient(n)
    k = n * (np.pi / 2.0)
    if _is_plain(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        u = _separable_sum(x.ravel(), t.ravel(), [(np.sin, np.cos, a)], k, chunk)[0]
        return u.reshape(x.shape) if x.shape else float(u[0])
    if _first_order(x, t):
        # value and gradient in closed form, then one chain-rule step
        xp, tp = np.broadcast_arrays(*(np.asarray(primal_value(v), dtype=float) for v in (x, t)))
        ak = a * k
        terms = [(np.sin, np.cos, a), (np.cos, np.cos, ak), (np.sin, lambda z: -np.sin(z), ak)]
        u, ux, ut = (v.reshape(xp.shape) for v in _separable_sum(xp.ravel(), tp.ravel(), terms, k, chunk))
        return _chain_dual(u, [(ux, x), (ut, t)])
    x, t = _col(x), _col(t)
    terms = cos(t * k[None, :]) * sin(x * k[None, :])
    return terms @ a[:, None]


def _separable_sum(xf, tf, terms, k, chunk):
    """Sums of c_n f(k_n x) g(k_n t) for each (f, g, c) in ``terms``.

    Evaluation grids repeat coordinates, so the transcendental factors are
    computed once per distinct x and t and combined by a small matmul; the
    point values are then gathered.  Scattered points fall back to chunks.
    """
    xu, xi = np.unique(xf, return_inverse=True)
    tu, ti = np.unique(tf, return_inverse=True)
    out = []
    if xu.size * tu.size <= 4 * xf.size:
        for f, g, c in terms:
            table = (f(xu[:, None] * k) * c) @ g(tu[:, None] * k).T
            out.append(table[xi.ravel(), ti.ravel()])
        return out
    for f, g, c in terms:
        v = np.empty(xf.size)
        for s in range(0, xf.size, chunk):
            v[s : s + chunk] = (f(xf[s : s + chunk, None] * k) * g(tf[s : s + chunk, None] * k)) @ c
        out.append(v)
    return out


def _membrane_tables(n_terms):
    i = np.arange(1, n_terms + 1, 2, dtype=float)  # even indices vanish
    j = np.arange(1, n_terms + 1, 2, dtype=float)
    coef = (576.0 / np.pi**6) * 4.0 / (i[:, None] ** 3 * j[None, :] ** 3)
    omega = np.pi * np.sqrt(9.0 * i[:, None] ** 2 + 4.0 * j[None, :] ** 2)
    return i * (np.pi / 2.0), j * (np.pi / 3.0), coef, omega


def membrane_series(x, y, t, n_terms=100, chunk=256):
    """Double sine series of the fixed-edge membrane, ``n_terms`` per index.

    Only odd i, j contribute since the factor (1 + (-1)^(i+1)) kills even ones.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    ki, kj, coef, omega = _membrane_tables(n_terms)
    if _is_plain(x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        shape = x.shape
        xf, yf, tf = x.ravel(), y.ravel(), t.ravel()
        out = np.empty(xf.size)
        for s in range(0, xf.size, chunk):
            sx = np.sin(xf[s : s + chunk, None] * ki)
            sy = np.sin(yf[s : s + chunk, None] * kj)
            ct = np.cos(tf[s : s + chunk, None, None] * omega)
            out[s : s + chunk] = np.einsum("ni,nj,nij,ij->n", sx, sy, ct, coef)
        return out.reshape(shape) if shape else float(out[0])
    if _first_order(x, y, t):
        xp, yp, tp = np.broadcast_arrays(
            *(np.asarray(v.primal if isinstance(v, Dual) else v, dtype=float) for v in (x, y, t))
        )
        xf, yf, tf = xp.ravel(), yp.ravel(), tp.ravel()
        u, ux, uy, ut = (np.empty(xf.size) for _ in range(4))
        for s in range(0, xf.size, chunk):
            ax, ay = xf[s : s + chunk, None] * ki, yf[s : s + chunk, None] * kj
            sx, cx, sy, cy = np.sin(ax), np.cos(ax), np.sin(ay), np.cos(ay)
            at = tf[s : s + chunk, None, None] * omega
            ct, st = np.cos(at) * coef, -np.sin(at) * coef * omega
            u[s : s + chunk] = np.einsum("ni,nj,nij->n", sx, sy, ct)
            ux[s : s + chunk] = np.einsum("ni,nj,nij->n", cx * ki, sy, ct)
            uy[s : s + chunk] = np.einsum("ni,nj,nij->n", sx, cy * kj, ct)
            ut[s : s + chunk] = np.einsum("ni,nj,nij->n", sx, sy, st)
        sh = xp.shape
        return _chain_dual(u.reshape(sh), [(ux.reshape(sh), x), (uy.reshape(sh), y), (ut.reshape(sh), t)])
    x, y, t = _col(x), _col(y), _col(t)
    n = max(_shape_len(v) for v in (x, y, t))
    sx = sin(x * ki[None, :]).reshape(n, len(ki), 1)
    sy = sin(y * kj[None, :]).reshape(n, 1, len(kj))
    ct = cos(t.reshape(n, 1, 1) * omega[None])
    return (sx * sy * ct * coef[None]).sum(axis=(1, 2)).reshape(n, 1)


def _shape_len(v):
    s = np.shape(primal_value(v))
    return s[0] if s else 1


# ---------------------------------------------------------------------------
# finite-difference references


def heat2d_step(phi, h, dt, alpha):
    """One explicit step; boundary rows and columns are left untouched."""
    r = dt * alpha / (h * h)
    out = phi.copy()
    nb = phi[:-2, 1:-1] + phi[2:, 1:-1] + phi[1:-1, :-2] + phi[1:-1, 2:]
    out[1:-1, 1:-1] = (1.0 - 4.0 * r) * phi[1:-1, 1:-1] + r * nb
    return out


def heat2d_fd_solve(problem, h, dt, steps, record_every=None):
    """Explicit five-point scheme on the unit plate.

    Returns a list of GridFields (axes x, y) recorded at step 0, every
    ``record_every`` steps, and the final step.  Raises StabilityError when
    the self-coefficient 1 - 4 dt alpha / h^2 would be negative.
    """
    alpha = problem.coefficients["alpha"]
    bound = h * h / (4.0 * alpha)
    if dt > bound:
        raise StabilityError(
            f"unstable configuration: need dt ≤ h²/(4α) = {bound:.6g}, got dt = {dt:.6g}"
        )
    if steps < 0:
        raise ValueError("steps must be non-negative")
    (x0, x1), (y0, y1) = problem.bounds
    nx = int(round((x1 - x0) / h))
    ny = int(round((y1 - y0) / h))
    if not (np.isclose(nx * h, x1 - x0) and np.isclose(ny * h, y1 - y0)):
        raise ValueError(f"h = {h} does not divide the domain")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    phi = np.full((nx + 1, ny + 1), float(primal_value(problem.ic(np.array(0.5), np.array(0.5)))))
    bc = problem.bc
    # faces in x first, then y; y faces win at the (unused) corners
    phi[0, :] = bc[f"x={_fmt(x0)}"]
    phi[-1, :] = bc[f"x={_fmt(x1)}"]
    phi[:, 0] = bc[f"y={_fmt(y0)}"]
    phi[:, -1] = bc[f"y={_fmt(y1)}"]
    names = ("x", "y")
    out = [GridField((xs, ys), phi.copy(), names)]
    recorded = {0}
    for k in range(1, steps + 1):
        phi = heat2d_step(phi, h, dt, alpha)
        if (record_every and k % record_every == 0) or k == steps:
            if k not in recorded:
                out.append(GridField((xs, ys), phi.copy(), names))
                recorded.add(k)
    return out


def _burgers_rhs(u, h, nu):
    """Semi-discrete Burgers operator.

    Convection: conservative flux with Lax-Friedrichs splitting and
    fifth-order upwind-biased reconstruction.  Diffusion: fourth-order
    central differences.  Ghost values come from odd reflection about each
    end, which is exact for odd-symmetric solutions with u = 0 at the walls.
    """
    n = u.size
    g = 3
    up = np.empty(n + 2 * g)
    up[g:-g] = u
    up[g - np.arange(1, g + 1)] = -u[1 : g + 1]
    up[n + g - 1 + np.arange(1, g + 1)] = -u[n - 2 : n - 2 - g : -1]
    f = 0.5 * up * up
    a = np.abs(up).max()
    fp = 0.5 * (f + a * up)
    fm = 0.5 * (f - a * up)
    i = np.arange(g - 1, g + n)
    fhp = (2 * fp[i - 2] - 13 * fp[i - 1] + 47 * fp[i] + 27 * fp[i + 1] - 3 * fp[i + 2]) / 60.0
    fhm = (2 * fm[i + 3] - 13 * fm[i + 2] + 47 * fm[i + 1] + 27 * fm[i] - 3 * fm[i - 1]) / 60.0
    F = fhp + fhm
    conv = -(F[1:] - F[:-1]) / h
    j = np.arange(g, g + n)
    diff = (-up[j - 2] + 16 * up[j - 1] - 30 * up[j] + 16 * up[j + 1] - up[j + 2]) / (12.0 * h * h)
    r = conv + nu * diff
    r[0] = r[-1] = 0.0
    return r


def burgers_fd_solve(nu, nx, dt=None, T=1.0, n_records=2, safety=0.4, ic=None):
    """Reference solution of viscous Burgers on [-1, 1] with zero walls.

    ``nx`` cells (nx + 1 nodes), classical RK4 in time.  ``dt=None`` picks
    ``safety`` times the stability limit.  The step is shrunk so that
    ``n_records`` equally spaced times in [0, T] land exactly on steps.
    Returns a GridField with axes (x, t).
    """
    h = 2.0 / nx
    x = np.linspace(-1.0, 1.0, nx + 1)
    u = -np.sin(np.pi * x) if ic is None else np.asarray(ic(x), dtype=float).copy()
    u[0] = u[-1] = 0.0
    umax = max(float(np.abs(u).max()), 1e-300)
    limit = min(h / umax, h * h / (2.0 * nu))
    if dt is None:
        dt = safety * limit
    elif dt > limit:
        raise StabilityError(
            f"CFL violated: need dt ≤ min(h/max|u|, h²/(2ν)) = {limit:.6g}, got dt = {dt:.6g}"
        )
    if n_records < 2:
        raise ValueError("n_records must be at least 2")
    segments = n_records - 1
    per = int(np.ceil(T / segments / dt))
    dt = T / (segments * per)
    ts = np.linspace(0.0, T, n_records)
    field = np.empty((nx + 1, n_records))
    field[:, 0] = u
    for s in range(1, n_records):
        for _ in range(per):
            k1 = _burgers_rhs(u, h, nu)
            k2 = _burgers_rhs(u + 0.5 * dt * k1, h, nu)
            k3 = _burgers_rhs(u + 0.5 * dt * k2, h, nu)
            k4 = _burgers_rhs(u + dt * k3, h, nu)
            u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        field[:, s] = u
    if not np.all(np.isfinite(field)):
        raise StabilityError("Burgers reference diverged")
    return GridField((x, ts), field, ("x", "t"))
