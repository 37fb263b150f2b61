"""INI run configurations: schema, validation and conversion to specs."""

import configparser
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .pde import make_problem
from .sampling import PartitionSchedule
from .training import LossSpec, NetworkSpec, OptimizerSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "preset_names", "preset_path"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the culprit."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


def _floats(s):
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


def _ints(s):
    out = []
    for v in s.split(","):
        v = v.strip()
        if not v:
            continue
        f = float(v)
        if f != int(f):
            raise ValueError(f"{v!r} is not an integer")
        out.append(int(f))
    return out


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _opt_int(s):
    return None if s.strip().lower() in ("", "none") else int(s)


def _boxes(s):
    """``lo:hi,lo:hi;lo:hi,lo:hi`` -> list of boxes."""
    out = []
    for box in s.split(";"):
        box = box.strip()
        if not box:
            continue
        out.append([tuple(float(v) for v in iv.split(":")) for iv in box.split(",")])
    return out


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        if v and isinstance(v[0], list):
            return "; ".join(",".join(f"{lo!r}:{hi!r}" for lo, hi in b) for b in v)
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


# section -> key -> (parser, default)
SCHEMA = {
    "problem": {
        "kind": (str, "wave1d"),
        "c": (float, 1.0),
        "nu": (float, 0.01 / np.pi),
        "alpha": (float, 1.28e-4),
        "T": (_opt_float, None),
    },
    "network": {
        "layers": (_ints, [2, 8, 4, 2, 1]),
        "activation": (str, "tanh"),
        "hard_constraints": (_bool, False),
        "time_power": (_opt_int, None),
    },
    "optimizer": {
        "kind": (str, "lbfgs"),
        "m": (int, 50),
        "c1": (float, 1e-4),
        "c2": (float, 0.9),
        "alpha": (float, 1e-3),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "delta": (float, 1e-8),
        "gamma": (float, 1e-3),
        "adam_iters": (int, 0),
        "loss_threshold": (_opt_float, None),
    },
    "loss": {
        "lambda_weight": (float, 0.5),
        "term_mode": (str, "three_term"),
        "n_ic": (int, 1000),
        "n_bc": (int, 1000),
        "n_physics": (int, 10000),
        "n_data": (int, 0),
        "ic_velocity": (_bool, True),
        "weights": (_floats, [1.0, 1.0, 1.0]),
        "resample_every": (int, 1),
    },
    "sampling": {
        "strategy": (str, "uniform"),
        "pilot_n": (int, 1000),
        "seeds": (_boxes, []),
        "growth": (float, 0.5),
        "stages": (int, 4),
        "iterations_per_stage": (int, 100),
    },
    "run": {
        "budget": (int, 1000),
        "snapshot_interval": (int, 50),
        "seed": (int, 0),
        "output_dir": (str, "runs/out"),
        "eval_nx": (int, 200),
        "eval_nt": (int, 400),
        "time_limit": (_opt_float, None),
    },
    "fd": {
        "h": (float, 0.02),
        "dt": (_opt_float, None),
        "steps": (int, 10000),
        "record_every": (int, 5000),
        "nx": (int, 1990),
        "n_records": (int, 400),
    },
    "plot": {
        "xlabel": (str, "x"),
        "ylabel": (str, "t"),
    },
}

CHOICES = {
    ("problem", "kind"): ("wave1d", "burgers", "heat2d", "membrane2d"),
    ("network", "activation"): ("tanh", "softplus", "identity"),
    ("optimizer", "kind"): ("lbfgs", "adam", "sgd", "adam_lbfgs"),
    ("loss", "term_mode"): ("two_term", "three_term"),
    ("sampling", "strategy"): ("uniform", "progressive", "gradient_weighted"),
}


@dataclass
class RunConfig:
    """Fully resolved configuration: every key of every section, typed."""

    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_ini() == other.to_ini()

    # -- parsing --------------------------------------------------------
    @classmethod
    def from_string(cls, text, source="<config>"):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keys are case sensitive (T)
        try:
            cp.read_string(text, source=source)
        except configparser.Error as err:
            raise ConfigError("<file>", str(err).splitlines()[0]) from None
        values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
        for section in cp.sections():
            if section not in SCHEMA:
                raise ConfigError(section, "unknown section")
            for key, raw in cp.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                parser = SCHEMA[section][key][0]
                try:
                    values[section][key] = parser(raw)
                except ValueError as err:
                    raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} ({err})") from None
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError("<file>", f"cannot read {path}: {err.strerror}") from None
        return cls.from_string(text, str(path))

    def to_ini(self):
        buf = io.StringIO()
        for section, keys in SCHEMA.items():
            buf.write(f"[{section}]\n")
            for key in keys:
                buf.write(f"{key} = {_fmt_value(self.values[section][key])}\n")
            buf.write("\n")
        return buf.getvalue()

    # -- validation -----------------------------------------------------
    def validate(self):
        v = self.values
        for (section, key), allowed in CHOICES.items():
            if v[section][key] not in allowed:
                raise ConfigError(f"{section}.{key}", f"must be one of {', '.join(allowed)}")

        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        p, n, o, lo, s, r = (v[k] for k in ("problem", "network", "optimizer", "loss", "sampling", "run"))
        for key in ("c", "nu", "alpha"):
            need(p[key] > 0, f"problem.{key}", "must be positive")
        need(p["T"] is None or p["T"] > 0, "problem.T", "must be positive")
        need(len(n["layers"]) >= 2 and min(n["layers"]) >= 1, "network.layers", "need at least two positive sizes")
        n_in = 2 if p["kind"] in ("wave1d", "burgers") else 3
        need(n["layers"][0] == n_in, "network.layers", f"first size must be the input count {n_in}")
        need(n["layers"][-1] == 1, "network.layers", "last size must be 1")
        need(n["time_power"] in (None, 1, 2), "network.time_power", "must be 1 or 2")
        need(o["m"] >= 1, "optimizer.m", "must be at least 1")
        need(0 < o["c1"] < 1, "optimizer.c1", "need 0 < c1 < c2 < 1")
        need(o["c1"] < o["c2"] < 1, "optimizer.c2", "need 0 < c1 < c2 < 1")
        need(o["alpha"] > 0, "optimizer.alpha", "must be positive")
        need(0 <= o["beta1"] < 1, "optimizer.beta1", "must lie in [0, 1)")
        need(0 <= o["beta2"] < 1, "optimizer.beta2", "must lie in [0, 1)")
        need(o["gamma"] > 0, "optimizer.gamma", "must be positive")
        need(o["adam_iters"] >= 0, "optimizer.adam_iters", "must be non-negative")
        need(0.0 <= lo["lambda_weight"] <= 1.0, "loss.lambda_weight", "must lie in [0, 1]")
        need(lo["n_physics"] > 0, "loss.n_physics", "must be positive")
        need(lo["n_ic"] > 0, "loss.n_ic", "must be positive")
        need(lo["n_bc"] > 0, "loss.n_bc", "must be positive")
        need(lo["n_data"] >= 0, "loss.n_data", "must be non-negative")
        need(len(lo["weights"]) == 3, "loss.weights", "need three weights (ic, bc, physics)")
        need(lo["resample_every"] >= 1, "loss.resample_every", "must be at least 1")
        if lo["term_mode"] == "two_term" and lo["lambda_weight"] < 1:
            need(lo["n_data"] > 0, "loss.n_data", "two_term mode needs data points unless lambda_weight = 1")
        need(s["pilot_n"] >= 100, "sampling.pilot_n", "must be at least 100")
        if s["strategy"] == "progressive":
            need(bool(s["seeds"]), "sampling.seeds", "progressive sampling needs seed boxes")
            need(s["stages"] >= 1, "sampling.stages", "must be at least 1")
        need(r["budget"] > 0, "run.budget", "must be positive")
        need(r["snapshot_interval"] >= 0, "run.snapshot_interval", "must be non-negative")
        need(r["eval_nx"] >= 2 and r["eval_nt"] >= 2, "run.eval_nx", "grid needs at least 2 points per axis")
        f = v["fd"]
        need(f["h"] > 0, "fd.h", "must be positive")
        need(f["dt"] is None or f["dt"] > 0, "fd.dt", "must be positive")
        need(f["steps"] >= 0, "fd.steps", "must be non-negative")
        need(f["nx"] >= 8, "fd.nx", "must be at least 8")
        need(f["n_records"] >= 2, "fd.n_records", "must be at least 2")
        try:
            self.problem()
        except ValueError as err:
            raise ConfigError("problem", str(err)) from None
        return self

    # -- conversion -----------------------------------------------------
    def problem(self):
        p = self.values["problem"]
        kind = p["kind"]
        kw = {}
        if kind == "wave1d":
            kw["c"] = p["c"]
        elif kind == "burgers":
            kw["nu"] = p["nu"]
        elif kind == "heat2d":
            kw["alpha"] = p["alpha"]
        if p["T"] is not None and kind in ("heat2d", "membrane2d"):
            kw["T"] = p["T"]
        prob = make_problem(kind, **kw)
        if p["T"] is not None and kind in ("wave1d", "burgers"):
            prob.T = float(p["T"])
        return prob

    def network_spec(self):
        n = self.values["network"]
        return NetworkSpec(list(n["layers"]), n["activation"], n["hard_constraints"], n["time_power"])

    def optimizer_spec(self):
        o = self.values["optimizer"]
        return OptimizerSpec(**o)

    def loss_spec(self, problem=None):
        lo, s, r = self.values["loss"], self.values["sampling"], self.values["run"]
        problem = problem or self.problem()
        schedule = None
        if s["strategy"] == "progressive":
            try:
                schedule = PartitionSchedule(
                    problem.domain, s["seeds"], s["growth"], s["stages"], s["iterations_per_stage"]
                )
            except ValueError as err:
                raise ConfigError("sampling.seeds", str(err)) from None
        data = None
        if lo["term_mode"] == "two_term" and lo["n_data"] > 0:
            if problem.analytical is None:
                raise ConfigError("loss.n_data", "data points need an analytical solution")
            from .sampling import uniform_sample

            pts = uniform_sample(problem.domain, lo["n_data"], r["seed"] + 7919).points
            vals = problem.analytical(*[pts[:, k : k + 1] for k in range(pts.shape[1])])
            data = (pts, np.asarray(vals, dtype=float).reshape(-1))
        spec = LossSpec(
            lambda_weight=lo["lambda_weight"],
            term_mode=lo["term_mode"],
            data_points=data,
            n_physics=lo["n_physics"],
            n_ic=lo["n_ic"],
            n_bc=lo["n_bc"],
            strategy=s["strategy"],
            ic_velocity=lo["ic_velocity"],
            weights=tuple(lo["weights"]),
            schedule=schedule,
            pilot_n=s["pilot_n"],
            resample_every=lo["resample_every"],
        )
        try:
            return spec.validate()
        except ValueError as err:
            raise ConfigError("loss", str(err)) from None


def load_config(path_or_preset):
    """Read a config file, or a shipped preset by name."""
    import os

    if os.path.exists(path_or_preset):
        return RunConfig.from_file(path_or_preset)
    if path_or_preset in preset_names():
        return RunConfig.from_string(preset_path(path_or_preset).read_text(), path_or_preset)
    raise ConfigError("<file>", f"no such config file or preset: {path_or_preset}")


def preset_names():
    root = resources.files("pinnlab") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_path(name):
    return resources.files("pinnlab") / "presets" / f"{name}.ini"
