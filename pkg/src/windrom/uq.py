"""Monte Carlo propagation of wind-measurement uncertainty.

Each sample draws an inflow condition, evaluates the wind-field ROM,
solves the full-order transport problem on the predicted wind, and feeds
nodal concentration fields at the requested times into streaming
accumulators (min/mean/max/variance per node). Per-sample fields are not
retained at scale; the distribution at the highest-variance node is
recovered from a tracked-node trace (all nodes are kept for small runs,
a pilot-selected candidate set for large ones).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ad import AdProblem, solve_ad
from .errors import SolverError, WindromError
from .fem import FemWorkspace
from .ins import ParameterPoint
from .mesh import build_taylor_hood

# Runs up to this many samples keep the full per-sample table at the
# histogram times; larger runs track a pilot-selected candidate set.
FULL_TRACE_LIMIT = 1024
PILOT_SAMPLES = 128
TRACKED_NODES = 32


@dataclass(frozen=True)
class UncertaintySpec:
    """Independent uniform distributions around the measured means."""

    w_i_mean: float = 4.0
    w_i_half_width: float = 0.2
    w_d_mean: float = 97.0
    w_d_half_width: float = 10.0
    n_samples: int = 5000
    seed: int = 0
    two_parameter: bool = True

    def __post_init__(self):
        if self.w_i_half_width < 0 or self.w_d_half_width < 0:
            raise ValueError("half-widths must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("need at least one sample")

    def draw(self):
        """All parameter draws, deterministic under the seed."""
        rng = np.random.default_rng(self.seed)
        w_i = rng.uniform(self.w_i_mean - self.w_i_half_width,
                          self.w_i_mean + self.w_i_half_width, self.n_samples) \
            if self.w_i_half_width > 0 else np.full(self.n_samples, self.w_i_mean)
        w_d = rng.uniform(self.w_d_mean - self.w_d_half_width,
                          self.w_d_mean + self.w_d_half_width, self.n_samples) \
            if self.w_d_half_width > 0 else np.full(self.n_samples, self.w_d_mean)
        if self.two_parameter:
            return [ParameterPoint(a, b % 360.0) for a, b in zip(w_i, w_d)]
        return [ParameterPoint(a) for a in w_i]


class StreamingMoments:
    """Per-node min/max and first two moments, merged sample by sample."""

    def __init__(self, n_nodes):
        self.count = 0
        self.minimum = np.full(n_nodes, np.inf)
        self.maximum = np.full(n_nodes, -np.inf)
        self._sum = np.zeros(n_nodes)
        self._sumsq = np.zeros(n_nodes)

    def add(self, values):
        self.count += 1
        np.minimum(self.minimum, values, out=self.minimum)
        np.maximum(self.maximum, values, out=self.maximum)
        self._sum += values
        self._sumsq += values * values

    @property
    def mean(self):
        m = self._sum / self.count
        # identical samples have that exact value as their mean; suppress
        # the accumulation rounding so degenerate runs satisfy min == mean
        same = self.maximum == self.minimum
        m[same] = self.minimum[same]
        return m

    @property
    def variance(self):
        v = self._sumsq / self.count - self.mean ** 2
        # identical samples have exactly zero spread; suppress the sumsq
        # cancellation residue so degenerate runs report true zeros
        v[self.maximum == self.minimum] = 0.0
        return np.maximum(v, 0.0)


@dataclass
class UqResult:
    times: list
    stats: dict                  # time -> StreamingMoments
    hv_node: int
    hv_histogram: np.ndarray     # samples at the highest-variance node, final time
    hv_time: float
    parameter_log: np.ndarray    # (n, 2) drawn (w_i, w_d); w_d = nan in 1-parameter mode
    n_failed: int
    failed_samples: list
    degenerate_variance: bool = False
    hv_trace_exact: bool = True
    sample_tables: dict = field(default_factory=dict)  # time -> (kept, n) fields, small runs only
    meta: dict = field(default_factory=dict)

    def field_stats(self, t):
        m = self.stats[t]
        return {"min": m.minimum, "mean": m.mean, "max": m.maximum,
                "variance": m.variance}

    def median_field(self, t):
        """Nodal sample median; needs the retained per-sample table, so it
        is available for runs small enough to keep one (the 'expected'
        panel alternative to the mean)."""
        if t not in self.sample_tables:
            raise WindromError(
                "median needs per-sample fields, which large runs do not retain")
        return np.median(self.sample_tables[t], axis=0)


def highest_variance_node(result, t):
    """argmax of nodal variance at a stored time; ties break to the lowest id."""
    if t not in result.stats:
        raise KeyError(f"time {t} not stored in the UQ result")
    var = result.stats[t].variance
    return int(np.argmax(var))


def run_monte_carlo(rom, ad_template, spec, times, workspace=None):
    """Propagate the uncertainty spec through the ROM + transport pipeline.

    rom: a trained PodiArtifact covering the sampled parameter box.
    ad_template: AdProblem carrying mesh, wind placeholder, diffusion,
    initial field and time grid; the wind is replaced per sample.
    times: subset of the transport time grid to accumulate statistics at.
    """
    mesh = ad_template.mesh
    space = build_taylor_hood(mesh)
    ws = workspace or FemWorkspace(space)
    times = [float(t) for t in times]
    for t in times:
        if t > ad_template.t_end + 1e-9:
            raise ValueError(f"requested time {t} beyond the horizon {ad_template.t_end}")

    draws = spec.draw()
    n_nodes = mesh.n_vertices
    stats = {t: StreamingMoments(n_nodes) for t in times}
    hv_time = times[-1]

    full_trace = spec.n_samples <= FULL_TRACE_LIMIT
    trace = {t: np.empty((spec.n_samples, n_nodes)) for t in times} if full_trace else None
    tracked_ids = None
    tracked_vals = []
    pilot_fields = []

    failures = []
    plog = np.full((spec.n_samples, 2), np.nan)
    kept = 0
    for k, mu in enumerate(draws):
        plog[k, 0] = mu.w_i
        if mu.w_d is not None:
            plog[k, 1] = mu.w_d
        if rom.is_extrapolation(mu):
            failures.append({"sample": k, "reason": "outside ROM bounds",
                             "w_i": mu.w_i, "w_d": mu.w_d})
            continue
        try:
            wind = rom.evaluate(mu)
            problem = AdProblem(
                mesh=mesh, wind=wind, kappa=ad_template.kappa,
                initial=ad_template.initial, t_end=ad_template.t_end,
                dt=ad_template.dt, source_meta=ad_template.source_meta,
                stabilized=ad_template.stabilized)
            series = solve_ad(problem, space=space, workspace=ws)
        except (SolverError, WindromError) as exc:
            failures.append({"sample": k, "reason": str(exc),
                             "w_i": mu.w_i, "w_d": mu.w_d})
            continue
        for t in times:
            field_t = series.at_time(t)
            stats[t].add(field_t)
            if full_trace:
                trace[t][kept] = field_t
        final = series.at_time(hv_time)
        if not full_trace:
            if kept < PILOT_SAMPLES:
                pilot_fields.append(final.copy())
                if kept == PILOT_SAMPLES - 1:
                    pilot_var = np.var(np.asarray(pilot_fields), axis=0)
                    tracked_ids = np.sort(np.argsort(pilot_var)[-TRACKED_NODES:])
                    tracked_vals = [f[tracked_ids] for f in pilot_fields]
            else:
                tracked_vals.append(final[tracked_ids])
        kept += 1

    if kept == 0:
        raise WindromError("all Monte Carlo samples failed; nothing to report")

    var = stats[hv_time].variance
    degenerate = bool(np.all(var <= 1e-300))
    hv = int(np.argmax(var))
    tables = {}
    if full_trace:
        tables = {t: trace[t][:kept].copy() for t in times}
        hist = tables[hv_time][:, hv].copy()
        exact = True
    else:
        pos = np.searchsorted(tracked_ids, hv)
        if pos < len(tracked_ids) and tracked_ids[pos] == hv:
            hist = np.asarray([v[pos] for v in tracked_vals])
            exact = True
        else:
            # the pilot missed the final argmax; report the best tracked node
            tracked_var = var[tracked_ids]
            pos = int(np.argmax(tracked_var))
            hv = int(tracked_ids[pos])
            hist = np.asarray([v[pos] for v in tracked_vals])
            exact = False

    return UqResult(
        times=times, stats=stats, hv_node=hv, hv_histogram=hist, hv_time=hv_time,
        parameter_log=plog, n_failed=len(failures), failed_samples=failures,
        degenerate_variance=degenerate, hv_trace_exact=exact,
        sample_tables=tables,
        meta={"n_samples": spec.n_samples, "seed": spec.seed,
              "kept": kept, "full_trace": full_trace},
    )
