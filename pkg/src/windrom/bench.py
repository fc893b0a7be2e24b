"""Comparison studies: error and speed-up over basis size, snapshot-count
sensitivity, and extrapolation behavior.

Every study generates one snapshot pool shared by both reduction methods,
trains across the requested basis sizes, and reports min/mean/max
statistics over the test set with the raw per-point tables retained.
Reports serialize to a self-describing tab-separated table plus a JSON
manifest; figures are rendered separately (see plots.py).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .containers import canonical_json, json_hash
from .errors import NonconvergenceError, WindromError
from .ins import InsProblem, ParameterPoint
from .pod import SnapshotSet, compute_pod
from .podg import train_podg
from .podi import train_podi


def relative_l2_error(u_ref, u_approx, metric=None):
    """|u_ref - u_approx| / |u_ref| in the Euclidean or metric norm."""
    u_ref = np.asarray(u_ref)
    d = u_ref - np.asarray(u_approx)
    if metric is None:
        num, den = np.linalg.norm(d), np.linalg.norm(u_ref)
    else:
        num = np.sqrt(d @ (metric @ d))
        den = np.sqrt(u_ref @ (metric @ u_ref))
    if den == 0:
        raise WindromError("relative error undefined for a zero reference field")
    return float(num / den)


def max_abs_error(u_ref, u_approx):
    """Largest pointwise coefficient error over the domain."""
    return float(np.abs(np.asarray(u_ref) - np.asarray(u_approx)).max())


def _timer_resolution():
    res = time.get_clock_info("perf_counter").resolution
    return max(res, 1e-9)


def time_action(action, reps):
    """Median wall time of an action over reps runs, first run discarded.

    Actions faster than 10x the clock granularity are re-measured in
    batches so the per-call estimate stays meaningful.
    """
    action()  # warm-up, excluded
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        action()
        times.append(time.perf_counter() - t0)
    med = float(np.median(times))
    floor = 10.0 * _timer_resolution()
    if med < floor:
        batch = max(2, int(np.ceil(floor / max(med, 1e-12))))
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            for _ in range(batch):
                action()
            times.append((time.perf_counter() - t0) / batch)
        med = float(np.median(times))
    return med


def measure_speedup(fom_solve, rom_eval, reps=5):
    """Median FOM time over median ROM time; warm-ups excluded."""
    if reps < 3:
        raise ValueError("speed-up needs at least 3 repetitions")
    return time_action(fom_solve, reps) / time_action(rom_eval, reps)


# ---------------------------------------------------------------------------
# Study configuration and report
# ---------------------------------------------------------------------------

@dataclass
class StudyConfig:
    """Protocol knobs shared by all bench studies."""

    mesh: object
    nu: float
    w_i_range: tuple
    n_train: int = 50
    n_test: int = 20
    n_rb_sweep: tuple = tuple(range(1, 21))
    n_rb_pressure: int | None = None   # None: min(n_rb, pressure rank)
    n_deim: int = 20
    methods: tuple = ("podg", "podi")
    timing_reps: int = 5
    seed: int = 0
    jobs: int = 1
    test_offset: float | None = None   # None: golden-ratio offset

    def __post_init__(self):
        if not self.n_rb_sweep:
            raise ValueError("basis-size sweep must be nonempty")
        if not self.methods:
            raise ValueError("at least one method is required")
        lo, hi = self.w_i_range
        if not lo < hi:
            raise ValueError("w_i range must be a nondegenerate interval")

    def training_parameters(self, n=None, w_i_range=None):
        lo, hi = w_i_range or self.w_i_range
        return [ParameterPoint(w) for w in np.linspace(lo, hi, n or self.n_train)]

    def test_parameters(self, w_i_range=None):
        """Equidistant test grid offset into the training-grid gaps.

        The default offset is the golden ratio, which cannot collide with
        any equidistant training grid; studies that need their samples at
        particular locations (e.g. pinning the first out-of-range point
        of an extrapolation run) may set test_offset explicitly, and
        collisions are still rejected downstream."""
        lo, hi = w_i_range or self.w_i_range
        step = (hi - lo) / self.n_test
        phi = self.test_offset if self.test_offset is not None \
            else 0.5 * (np.sqrt(5.0) - 1.0)
        return [ParameterPoint(lo + (k + phi) * step) for k in range(self.n_test)]


@dataclass
class StudyReport:
    study: str
    columns: list
    rows: list                     # list of dicts with the column keys
    raw: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def write_table(self, path):
        """Self-describing tab-separated table with a commented preamble."""
        lines = [f"# study: {self.study}"]
        for k in sorted(self.metadata):
            lines.append(f"# {k}: {canonical_json(self.metadata[k])}")
        for f in self.failures:
            lines.append(f"# failure: {canonical_json(f)}")
        lines.append("\t".join(self.columns))
        for row in self.rows:
            lines.append("\t".join(_fmt(row.get(c)) for c in self.columns))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_raw(self, path):
        with open(path, "w") as fh:
            json.dump({"study": self.study, "metadata": self.metadata,
                       "rows": self.rows, "raw": self.raw,
                       "failures": self.failures}, fh, indent=2, sort_keys=True)

    def select(self, **kv):
        return [r for r in self.rows if all(r.get(k) == v for k, v in kv.items())]


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _stats(values):
    arr = np.asarray([v for v in values if v is not None and np.isfinite(v)])
    if len(arr) == 0:
        return {"min": None, "mean": None, "max": None}
    return {"min": float(arr.min()), "mean": float(arr.mean()), "max": float(arr.max())}


# ---------------------------------------------------------------------------
# Snapshot generation
# ---------------------------------------------------------------------------

_WORKER_PROBLEM = None


def _pool_init(mesh, nu, enclosed):
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = InsProblem(mesh, nu, enclosed_flow=enclosed)


def _pool_solve(mu):
    sol = _WORKER_PROBLEM.solve_steady(mu)
    return sol.u, sol.p


def generate_snapshots(problem, parameters, jobs=1):
    """Solve the FOM at every parameter; returns (U, P) column matrices.

    Solves are independent; jobs > 1 runs them on a process pool.
    """
    if jobs > 1:
        with ProcessPoolExecutor(
                max_workers=jobs, initializer=_pool_init,
                initargs=(problem.mesh, problem.nu, problem.enclosed_flow)) as ex:
            results = list(ex.map(_pool_solve, parameters))
    else:
        results = []
        for mu in parameters:
            sol = problem.solve_steady(mu)
            results.append((sol.u, sol.p))
    U = np.column_stack([r[0] for r in results])
    P = np.column_stack([r[1] for r in results])
    return U, P


def snapshot_sets(problem, parameters, U, P):
    ss_u = SnapshotSet(U, parameters=parameters, kind="velocity",
                       inner_product="mass", mass=problem.velocity_mass)
    ss_p = SnapshotSet(P, parameters=parameters, kind="pressure",
                       inner_product="mass", mass=problem.pressure_mass)
    return ss_u, ss_p


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def _train_all(config, problem, ss_u, ss_p, sweep=None):
    """Artifacts per (method, n_rb), sharing the POD work across sizes."""
    sweep = list(sweep or config.n_rb_sweep)
    n_max = max(sweep)
    artifacts = {}
    basis_raw = compute_pod(ss_u, n_modes=min(n_max, _rank(ss_u)))
    if "podi" in config.methods:
        for n in sweep:
            artifacts["podi", n] = train_podi(
                ss_u, n_rb=min(n, basis_raw.n_rb), basis=basis_raw)
    if "podg" in config.methods:
        basis_lift, basis_p, lifting = _podg_bases(problem, ss_u, ss_p, n_max)
        for n in sweep:
            n_u = min(n, basis_lift.n_rb)
            n_p = min(config.n_rb_pressure or n, basis_p.n_rb)
            artifacts["podg", n] = train_podg(
                ss_u, ss_p, problem, n_rb=n_u, n_rb_p=n_p,
                n_deim=min(config.n_deim, _rank(ss_u)),
                basis_u=basis_lift, basis_p=basis_p, lifting=lifting)
    return artifacts


def _podg_bases(problem, ss_u, ss_p, n_max):
    from .podg import compute_lifting_fields, _lift_coeffs

    two_param = ss_u.parameters[0].w_d is not None
    lifting = compute_lifting_fields(problem, two_param)
    alphas = np.column_stack([_lift_coeffs(p, two_param) for p in ss_u.parameters])
    lifted = ss_u.S - lifting @ alphas
    lifted_set = SnapshotSet(lifted, parameters=ss_u.parameters, kind="velocity",
                             inner_product=ss_u.inner_product, mass=ss_u.mass)
    basis_lift = compute_pod(lifted_set, n_modes=min(n_max, _rank(lifted_set)))
    basis_p = compute_pod(ss_p, n_modes=min(n_max, _rank(ss_p)))
    return basis_lift, basis_p, lifting


def _rank(ss):
    lam = np.linalg.eigvalsh(ss.gram())
    return max(1, int((lam > 1e-14 * max(lam.max(), 1e-300)).sum()))


def _evaluate_artifact(method, artifact, mu):
    """Full-order velocity approximation, or None on nonconvergence."""
    if method == "podi":
        return artifact.evaluate(mu)
    sol = artifact.solve(mu)
    return artifact.lift_velocity(sol)


def run_comparison(config):
    """Error and speed-up against basis size (the head-to-head protocol)."""
    problem = InsProblem(config.mesh, config.nu)
    train_params = config.training_parameters()
    test_params = config.test_parameters()
    _check_disjoint(train_params, test_params)

    U, P = generate_snapshots(problem, train_params, config.jobs)
    ss_u, ss_p = snapshot_sets(problem, train_params, U, P)
    artifacts = _train_all(config, problem, ss_u, ss_p)

    refs = {}
    fom_times = {}
    for mu in test_params:
        refs[mu.w_i] = problem.solve_steady(mu).u
        fom_times[mu.w_i] = time_action(lambda m=mu: problem.solve_steady(m),
                                        config.timing_reps)

    rows, raw_err, raw_speedup, failures = [], {}, {}, []
    metric = problem.velocity_mass
    for method in config.methods:
        for n in config.n_rb_sweep:
            art = artifacts[method, n]
            errs, speedups = [], []
            for mu in test_params:
                try:
                    approx = _evaluate_artifact(method, art, mu)
                except NonconvergenceError as exc:
                    failures.append({"method": method, "n_rb": n, "w_i": mu.w_i,
                                     "residual": exc.residual})
                    errs.append(None)
                    speedups.append(None)
                    continue
                errs.append(relative_l2_error(refs[mu.w_i], approx, metric))
                rom_t = time_action(lambda a=art, m=mu: _evaluate_artifact(method, a, m),
                                    config.timing_reps)
                speedups.append(fom_times[mu.w_i] / rom_t)
            raw_err[f"{method}/{n}"] = errs
            raw_speedup[f"{method}/{n}"] = speedups
            row = {"method": method, "n_rb": n,
                   "n_failed": sum(e is None for e in errs)}
            row.update({f"err_{k}": v for k, v in _stats(errs).items()})
            row.update({f"speedup_{k}": v for k, v in _stats(speedups).items()})
            rows.append(row)

    return StudyReport(
        study="comparison",
        columns=["method", "n_rb", "err_min", "err_mean", "err_max",
                 "speedup_min", "speedup_mean", "speedup_max", "n_failed"],
        rows=rows,
        raw={"errors": raw_err, "speedups": raw_speedup,
             "fom_times": fom_times,
             "test_w_i": [mu.w_i for mu in test_params]},
        metadata=_meta(config, ss_u),
        failures=failures,
    )


def run_data_study(config, snapshot_counts):
    """Error against the number of training snapshots, fixed test set."""
    counts = list(snapshot_counts)
    if counts != sorted(counts):
        raise ValueError("snapshot counts must be ascending")
    problem = InsProblem(config.mesh, config.nu)
    test_params = config.test_parameters()
    refs = {mu.w_i: problem.solve_steady(mu).u for mu in test_params}
    metric = problem.velocity_mass
    n_rb = max(config.n_rb_sweep)

    rows, raw_err, failures = [], {}, []
    snapshot_hashes = {}
    for count in counts:
        train_params = config.training_parameters(n=count)
        _check_disjoint(train_params, test_params)
        U, P = generate_snapshots(problem, train_params, config.jobs)
        ss_u, ss_p = snapshot_sets(problem, train_params, U, P)
        artifacts = _train_all(config, problem, ss_u, ss_p, sweep=[n_rb])
        snapshot_hashes[str(count)] = ss_u.content_hash()
        for method in config.methods:
            art = artifacts[method, n_rb]
            errs = []
            for mu in test_params:
                try:
                    approx = _evaluate_artifact(method, art, mu)
                    errs.append(relative_l2_error(refs[mu.w_i], approx, metric))
                except NonconvergenceError as exc:
                    failures.append({"method": method, "n_s": count, "w_i": mu.w_i,
                                     "residual": exc.residual})
                    errs.append(None)
            raw_err[f"{method}/{count}"] = errs
            row = {"method": method, "n_s": count,
                   "n_failed": sum(e is None for e in errs),
                   "undersampled": count < 3}
            row.update({f"err_{k}": v for k, v in _stats(errs).items()})
            rows.append(row)

    meta = _meta(config, None)
    meta["snapshot_hashes"] = snapshot_hashes
    return StudyReport(
        study="data-study",
        columns=["method", "n_s", "err_min", "err_mean", "err_max",
                 "n_failed", "undersampled"],
        rows=rows,
        raw={"errors": raw_err, "test_w_i": [mu.w_i for mu in test_params]},
        metadata=meta,
        failures=failures,
    )


def run_extrapolation_study(config, train_range, eval_range):
    """Train on a sub-range, evaluate across a wider one; reports the
    maximum absolute error over the domain per test parameter."""
    t_lo, t_hi = train_range
    e_lo, e_hi = eval_range
    if not (e_lo <= t_lo and t_hi <= e_hi):
        raise ValueError("training range must be contained in the evaluation range")
    problem = InsProblem(config.mesh, config.nu)
    train_params = config.training_parameters(w_i_range=train_range)
    test_params = config.test_parameters(w_i_range=eval_range)
    _check_disjoint(train_params, test_params)

    U, P = generate_snapshots(problem, train_params, config.jobs)
    ss_u, ss_p = snapshot_sets(problem, train_params, U, P)
    artifacts = _train_all(config, problem, ss_u, ss_p)
    refs = {mu.w_i: problem.solve_steady(mu).u for mu in test_params}

    rows, raw, failures = [], {}, []
    for method in config.methods:
        for n in config.n_rb_sweep:
            art = artifacts[method, n]
            errs = []
            for mu in test_params:
                inside = t_lo <= mu.w_i <= t_hi
                try:
                    approx = _evaluate_artifact(method, art, mu)
                    err = max_abs_error(refs[mu.w_i], approx)
                except NonconvergenceError as exc:
                    failures.append({"method": method, "n_rb": n, "w_i": mu.w_i,
                                     "residual": exc.residual})
                    err = None
                errs.append(err)
                rows.append({"method": method, "n_rb": n, "w_i": mu.w_i,
                             "inside_training": inside, "max_abs_err": err,
                             "failed": err is None})
            raw[f"{method}/{n}"] = errs

    meta = _meta(config, ss_u)
    meta["train_range"] = list(train_range)
    meta["eval_range"] = list(eval_range)
    return StudyReport(
        study="extrapolation",
        columns=["method", "n_rb", "w_i", "inside_training", "max_abs_err", "failed"],
        rows=rows,
        raw={"errors": raw, "test_w_i": [mu.w_i for mu in test_params]},
        metadata=meta,
        failures=failures,
    )


def _check_disjoint(train_params, test_params):
    train = {p.as_tuple() for p in train_params}
    clash = [p for p in test_params if p.as_tuple() in train]
    if clash:
        raise ValueError(f"test points coincide with training points: {clash[:3]}")


def _meta(config, ss_u):
    meta = {
        "nu": config.nu,
        "w_i_range": list(config.w_i_range),
        "n_train": config.n_train,
        "n_test": config.n_test,
        "n_rb_sweep": list(config.n_rb_sweep),
        "n_deim": config.n_deim,
        "methods": list(config.methods),
        "timing_reps": config.timing_reps,
        "seed": config.seed,
        "mesh_hash": config.mesh.content_hash(),
    }
    if ss_u is not None:
        meta["snapshot_hash"] = ss_u.content_hash()
    meta["config_hash"] = json_hash({k: v for k, v in meta.items()})
    return meta
