"""Error norms, relative-error fields and convergence fitting."""

import os
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .autodiff import primal_value
from .pde import GridField, input_derivatives

__all__ = [
    "energy_error",
    "mse_error",
    "rel_l2_error",
    "relative_error_field",
    "fit_convergence_rate",
    "error_gradient_correlation",
    "gradient_norm_field",
    "ErrorReport",
    "error_report",
]


def _grid_gradients(f, axes):
    """Input gradient of an evaluator on a tensor grid, one array per axis."""
    if isinstance(f, GridField):
        vals = f.values
        return [np.gradient(vals, a, axis=k, edge_order=2) for k, a in enumerate(f.axes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.reshape(-1, 1) for m in mesh]
    out = []
    for k in range(len(cols)):
        _, d = input_derivatives(f, cols, k, order=1)
        d = np.asarray(primal_value(d), dtype=float)
        out.append(np.broadcast_to(d.reshape(-1), (mesh[0].size,)).reshape(mesh[0].shape))
    return out


def energy_error(u, approx, domain=((0.0, 2.0), (0.0, 4.0)), shape=(200, 400)):
    """Trapezoidal integral of |grad u - grad approx|^2 over a box.

    ``u`` and ``approx`` are evaluators (differentiated with duals) or
    GridFields (differentiated with second-order finite differences).
    """
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(domain, shape)]
    for f in (u, approx):
        if isinstance(f, GridField) and not all(
            len(a) == len(b) and np.allclose(a, b) for a, b in zip(f.axes, axes)
        ):
            raise ValueError("grid field does not match the quadrature grid")
    gu = _grid_gradients(u, axes)
    ga = _grid_gradients(approx, axes)
    integrand = sum((a - b) ** 2 for a, b in zip(gu, ga))
    for a in reversed(axes):
        integrand = trapezoid(integrand, a, axis=-1)
    return float(integrand)


def _values(g):
    return g.values if isinstance(g, GridField) else np.asarray(g, dtype=float)


def mse_error(u_grid, approx_grid):
    """Mean squared difference over all grid points."""
    u, a = _values(u_grid), _values(approx_grid)
    if u.shape != a.shape:
        raise ValueError(f"grids differ in shape: {u.shape} vs {a.shape}")
    return float(np.mean((u - a) ** 2))


def rel_l2_error(u_vec, approx_vec):
    """||u - approx||_2 / ||u||_2."""
    u = np.ravel(_values(u_vec))
    a = np.ravel(_values(approx_vec))
    if u.shape != a.shape:
        raise ValueError("vectors differ in length")
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(u - a) / nu)


def relative_error_field(u_grid, approx_grid, floor=1e-12):
    """approx / u - 1, with NaN where |u| < floor."""
    if not u_grid.congruent(approx_grid):
        raise ValueError("grids are not congruent")
    u, a = u_grid.values, approx_grid.values
    small = np.abs(u) < floor
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(small, np.nan, a / np.where(small, 1.0, u) - 1.0)
    return GridField(u_grid.axes, r, u_grid.names, allow_nan=True)


def fit_convergence_rate(points):
    """Least-squares line through (log N, log e); returns (gamma, exponent)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (N, error) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("N and error must be positive and finite")
    slope, intercept = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(np.exp(intercept)), float(slope)


def error_gradient_correlation(abs_error_field, gradient_norm_field):
    """Spearman rank correlation across cells; NaN when either field is constant."""
    e = np.ravel(_values(abs_error_field))
    g = np.ravel(_values(gradient_norm_field))
    if e.shape != g.shape:
        raise ValueError("fields are not congruent")
    ok = np.isfinite(e) & np.isfinite(g)
    e, g = e[ok], g[ok]
    if e.size < 2 or np.ptp(e) == 0 or np.ptp(g) == 0:
        return float("nan")
    return float(stats.spearmanr(e, g).statistic)


def gradient_norm_field(f, axes, names=()):
    """Euclidean norm of the input gradient on a grid."""
    grads = _grid_gradients(f, axes)
    return GridField(tuple(axes), np.sqrt(sum(g * g for g in grads)), names)


@dataclass
class ErrorReport:
    energy: float
    mse: float
    rel_l2: float
    abs_error_field: GridField
    rel_error_field: GridField
    gradient_norm_field: GridField

    @property
    def rel_error_mean(self):
        """Mean |relative error| over cells that are not NaN sentinels."""
        v = self.rel_error_field.values
        return float(np.nanmean(np.abs(v))) if np.any(np.isfinite(v)) else float("nan")

    def correlation(self):
        return error_gradient_correlation(self.abs_error_field, self.gradient_norm_field)

    def to_csv(self, path, fields_dir=None):
        """Summary row plus, optionally, per-field GridField CSVs."""
        with open(path, "w") as fh:
            fh.write("energy,mse,rel_l2,rel_error_mean_excluding_nan,error_gradient_spearman\n")
            fh.write(
                "%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (self.energy, self.mse, self.rel_l2, self.rel_error_mean, self.correlation())
            )
        if fields_dir is not None:
            self.abs_error_field.to_csv(os.path.join(fields_dir, "abs_error.csv"))
            self.rel_error_field.to_csv(os.path.join(fields_dir, "rel_error.csv"))
            self.gradient_norm_field.to_csv(os.path.join(fields_dir, "gradient_norm.csv"))


def error_report(approx, reference, axes, names=()):
    """Every metric of an approximation against a reference on one grid.

    ``reference`` may be an evaluator or a GridField on ``axes``.  The
    approximation is always an evaluator, so its gradient comes from duals.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    ref = reference if isinstance(reference, GridField) else GridField.from_function(reference, axes, names)
    app = GridField.from_function(approx, axes, names)
    domain = [(a[0], a[-1]) for a in axes]
    shape = tuple(len(a) for a in axes)
    energy = energy_error(ref if isinstance(reference, GridField) else reference, approx, domain, shape)
    diff = GridField(axes, np.abs(app.values - ref.values), names)
    return ErrorReport(
        energy=energy,
        mse=mse_error(ref, app),
        rel_l2=rel_l2_error(ref, app),
        abs_error_field=diff,
        rel_error_field=relative_error_field(ref, app),
        gradient_norm_field=gradient_norm_field(approx, axes, names),
    )
