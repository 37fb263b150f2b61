"""Collocation-point generation.

Three strategies: plain uniform draws, progressive expansion from regions
where data is dense, and rejection sampling weighted by the network's input
gradient norm.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .autodiff import primal_value
from .pde import input_derivatives

__all__ = [
    "SampleBatch",
    "ScheduleError",
    "FlatFieldWarning",
    "PartitionSchedule",
    "make_rng",
    "uniform_sample",
    "progressive_sample",
    "gradient_weighted_sample",
    "gradient_norm",
]


class ScheduleError(ValueError):
    """A progressive schedule cannot be built or sampled."""


class FlatFieldWarning(UserWarning):
    """Gradient field vanished; sampling fell back to uniform."""


def make_rng(seed, *stream):
    """Philox generator keyed by a seed and an optional stream path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass
class SampleBatch:
    points: np.ndarray
    stage: int = 0
    strategy: str = "uniform"
    fallback: bool = False
    acceptance: float = 1.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise ValueError("a batch needs at least one point")

    def __len__(self):
        return len(self.points)

    def columns(self):
        """Points split into (N, 1) columns, one per input axis."""
        return [self.points[:, k : k + 1] for k in range(self.points.shape[1])]

    def to_csv(self, path, names=None):
        d = self.points.shape[1]
        if names is None:
            names = {2: ("x", "t"), 3: ("x", "y", "t")}.get(d, tuple(f"x{k}" for k in range(d)))
        with open(path, "w") as fh:
            fh.write(",".join(names) + "\n")
            for row in self.points:
                fh.write(",".join("%.17g" % v for v in row) + "\n")


def _domain_array(domain):
    d = np.asarray(domain, dtype=float)
    if d.ndim != 2 or d.shape[1] != 2 or np.any(d[:, 0] >= d[:, 1]):
        raise ValueError(f"domain must be a list of (lo, hi) with lo < hi, got {domain}")
    return d


def _uniform_in(rng, box, n):
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n, len(box)))


def uniform_sample(domain, n, seed):
    """n i.i.d. uniform points in the box ``domain``."""
    if n <= 0:
        raise ValueError("n must be positive")
    box = _domain_array(domain)
    return SampleBatch(_uniform_in(make_rng(seed), box, n), 0, "uniform")


def _disjoint(a, b):
    return np.any((a[:, 1] <= b[:, 0]) | (b[:, 1] <= a[:, 0]))


@dataclass
class PartitionSchedule:
    """Nested axis-aligned boxes that grow from seed regions to the domain.

    Stage 0 is the seed boxes.  Each later stage moves every face a fixed
    fraction ``growth`` of the remaining way to the domain boundary, then
    clips neighbouring boxes at the midpoint of the gap that separated
    their seeds so they stay disjoint.  The last stage is the whole domain.
    """

    domain: list
    seeds: list
    growth: float = 0.5
    stages: int = 4
    iterations_per_stage: int = 100
    boxes: list = field(default=None, init=False)

    def __post_init__(self):
        dom = _domain_array(self.domain)
        if not 0 < self.growth <= 1:
            raise ScheduleError("growth must lie in (0, 1]")
        if self.stages < 1:
            raise ScheduleError("need at least one stage")
        seeds = [np.array(s, dtype=float).reshape(len(dom), 2) for s in self.seeds]
        if not seeds:
            raise ScheduleError("need at least one seed box")
        for s in seeds:
            if np.any(s[:, 0] >= s[:, 1]):
                raise ScheduleError(f"empty seed box {s.tolist()}")
            if np.any(s[:, 0] < dom[:, 0]) or np.any(s[:, 1] > dom[:, 1]):
                raise ScheduleError(f"seed box {s.tolist()} leaves the domain")
        for i in range(len(seeds)):
            for j in range(i + 1, len(seeds)):
                if not _disjoint(seeds[i], seeds[j]):
                    raise ScheduleError(f"seed boxes {i} and {j} overlap")
        # per-box clip limits from the separating gaps between seeds
        limits = [np.array(dom) for _ in seeds]
        for i, a in enumerate(seeds):
            for j, b in enumerate(seeds):
                if i == j:
                    continue
                ax = int(np.argmax(np.maximum(b[:, 0] - a[:, 1], a[:, 0] - b[:, 1])))
                if a[ax, 1] <= b[ax, 0]:
                    limits[i][ax, 1] = min(limits[i][ax, 1], 0.5 * (a[ax, 1] + b[ax, 0]))
                else:
                    limits[i][ax, 0] = max(limits[i][ax, 0], 0.5 * (b[ax, 1] + a[ax, 0]))
        boxes = [seeds]
        for _ in range(1, self.stages - 1):
            prev = boxes[-1]
            nxt = []
            for b, lim in zip(prev, limits):
                g = b.copy()
                g[:, 0] = b[:, 0] - self.growth * (b[:, 0] - dom[:, 0])
                g[:, 1] = b[:, 1] + self.growth * (dom[:, 1] - b[:, 1])
                g[:, 0] = np.maximum(g[:, 0], lim[:, 0])
                g[:, 1] = np.minimum(g[:, 1], lim[:, 1])
                nxt.append(g)
            boxes.append(nxt)
        if self.stages > 1:
            boxes.append([dom.copy()])
        self.boxes = boxes

    def stage_at(self, iteration):
        """Stage index for a training iteration under fixed-length stages."""
        return min(iteration // max(self.iterations_per_stage, 1), self.stages - 1)

    def region(self, stage):
        if not 0 <= stage < self.stages:
            raise ScheduleError(f"stage {stage} out of range for {self.stages} stages")
        return self.boxes[stage]

    def contains(self, stage, points):
        pts = np.atleast_2d(points)
        inside = np.zeros(len(pts), dtype=bool)
        for b in self.region(stage):
            inside |= np.all((pts >= b[:, 0]) & (pts <= b[:, 1]), axis=1)
        return inside


def progressive_sample(schedule, stage, n, seed):
    """Uniform over the union of the stage's boxes."""
    if n <= 0:
        raise ValueError("n must be positive")
    boxes = schedule.region(stage)
    if stage == schedule.stages - 1 and schedule.stages > 1:
        b = uniform_sample(schedule.domain, n, seed)
        return SampleBatch(b.points, stage, "progressive")
    vol = np.array([np.prod(b[:, 1] - b[:, 0]) for b in boxes])
    if not vol.sum() > 0:
        raise ScheduleError(f"stage {stage} region is empty")
    rng = make_rng(seed)
    counts = rng.multinomial(n, vol / vol.sum())
    pts = [_uniform_in(rng, b, c) for b, c in zip(boxes, counts) if c]
    return SampleBatch(np.concatenate(pts), stage, "progressive")


def gradient_norm(net, points):
    """Euclidean norm of the input gradient of ``net`` at each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = [pts[:, k : k + 1] for k in range(pts.shape[1])]
    sq = np.zeros(len(pts))
    for k in range(len(cols)):
        _, d = input_derivatives(net, cols, k, order=1)
        d = np.asarray(primal_value(d), dtype=float)
        sq += np.broadcast_to(d.reshape(-1), (len(pts),)) ** 2
    return np.sqrt(sq)


def gradient_weighted_sample(net, domain, n, seed, pilot_n=1000, chunk=None):
    """Rejection sampling with acceptance ||grad net|| / M.

    M is 1.1 times the largest gradient norm seen on a uniform pilot sample,
    so acceptance is proportional to the gradient norm (capped at 1 for the
    rare candidate that beats the pilot maximum).  A vanishing pilot field
    falls back to uniform sampling with a warning.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if pilot_n < 100:
        raise ValueError("pilot_n must be at least 100")
    box = _domain_array(domain)
    rng = make_rng(seed)
    pilot = _uniform_in(rng, box, pilot_n)
    top = float(np.max(gradient_norm(net, pilot)))
    if not np.isfinite(top):
        raise ValueError("non-finite gradient norm in pilot sample")
    if top < 1e-12:
        warnings.warn("flat gradient field: falling back to uniform sampling", FlatFieldWarning, stacklevel=2)
        pts = _uniform_in(rng, box, n)
        return SampleBatch(pts, 0, "gradient_weighted", fallback=True)
    M = 1.1 * top
    chunk = chunk or max(n, 1000)
    kept, got, proposed = [], 0, 0
    while got < n:
        cand = _uniform_in(rng, box, chunk)
        p = np.minimum(gradient_norm(net, cand) / M, 1.0)
        acc = cand[rng.random(chunk) < p]
        proposed += chunk
        kept.append(acc)
        got += len(acc)
    pts = np.concatenate(kept)[:n]
    return SampleBatch(pts, 0, "gradient_weighted", acceptance=got / proposed)
