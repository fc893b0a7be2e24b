"""Command-line pipeline driver.

Subcommands: mesh-info, snapshot, train, evaluate, bench
(compare | data-study | extrapolation), uq, serve. Every run writes a
manifest with the config hash, seed, artifact hashes and tool versions
into the output directory. Exit codes: 0 success, 2 usage error,
3 config validation failure, 1 any other failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import load_config, write_manifest
from .containers import array_hash
from .errors import ConfigError, WindromError


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except WindromError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(prog="windrom",
                                     description="reduced-order wind and transport workbench")
    sub = parser.add_subparsers(dest="command")
    parser.set_defaults(command=None)

    p = sub.add_parser("mesh-info", help="print mesh counts, tags and area")
    p.add_argument("path")
    p.add_argument("--format", choices=["windmesh", "gmsh"], default=None)
    p.set_defaults(handler=cmd_mesh_info)

    for name, handler, extras in [
        ("snapshot", cmd_snapshot, []),
        ("train", cmd_train, ["method", "n_rb"]),
        ("uq", cmd_uq, ["artifact"]),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        if "method" in extras:
            p.add_argument("--method", choices=["podi", "podg"], default=None)
            p.add_argument("--n-rb", type=int, default=None)
        if "artifact" in extras:
            p.add_argument("--artifact", default=None, help="trained PODI artifact path")
        p.set_defaults(handler=handler)

    p = sub.add_parser("evaluate", help="evaluate a trained ROM at one parameter point")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--artifact", default=None)
    p.add_argument("--w-i", type=float, required=True)
    p.add_argument("--w-d", type=float, default=None)
    p.add_argument("--t", type=float, nargs="*", default=None)
    p.add_argument("--field", choices=["wind", "concentration"], default="concentration")
    p.add_argument("--plot", action="store_true", help="also render the field to PNG")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("bench", help="run a comparison study")
    p.add_argument("study", choices=["compare", "data-study", "extrapolation"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--artifact", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", default=None, help="directory with dashboard assets")
    p.set_defaults(handler=cmd_serve)
    return parser


def _config(args, **extra_overrides):
    overrides = {}
    if getattr(args, "jobs", None) is not None:
        overrides["output.jobs"] = args.jobs
    if getattr(args, "seed", None) is not None:
        overrides["output.seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output.directory"] = args.out
    overrides.update(extra_overrides)
    return load_config(args.config, overrides=overrides)


def _outdir(config):
    out = config["output"]["directory"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_mesh_info(args):
    from .mesh import BoundaryTag, build_taylor_hood, load_mesh

    mesh = load_mesh(args.path, format=args.format)
    space = build_taylor_hood(mesh)
    outer, holes = mesh.boundary_loops()
    print(f"vertices        {mesh.n_vertices}")
    print(f"triangles       {mesh.n_triangles}")
    print(f"boundary edges  {len(mesh.boundary_edges)}")
    for tag in BoundaryTag:
        n = int((mesh.boundary_tags == int(tag)).sum())
        print(f"  {tag.name.lower():8} {n:6d}  length {mesh.boundary_length(tag):.6g}")
    print(f"holes           {len(holes)}")
    print(f"area            {mesh.area():.12g}")
    print(f"char length     {mesh.char_length:.6g}")
    print(f"velocity dofs   {space.n_velocity_dofs}")
    print(f"pressure dofs   {space.n_pressure_dofs}")
    print(f"total dofs      {space.n_velocity_dofs + space.n_pressure_dofs}")
    return 0


def _snapshot_dir(outdir):
    return os.path.join(outdir, "snapshots")


def _generate_or_load_snapshots(config, outdir, write=True):
    """Snapshot matrices for the configured training plan, cached on disk."""
    from .bench import generate_snapshots
    from .ins import InsProblem, load_flow_solution, save_flow_solution

    sdir = _snapshot_dir(outdir)
    params = config.training_parameters()
    problem = InsProblem(config.mesh(), config["physics"]["nu"],
                         enclosed_flow=config.two_parameter)
    files = [os.path.join(sdir, f"flow-{k:04d}.bin") for k in range(len(params))]
    if all(os.path.exists(f) for f in files):
        sols = [load_flow_solution(f) for f in files]
        if [s.mu.as_tuple() for s in sols] == [p.as_tuple() for p in params]:
            U = np.column_stack([s.u for s in sols])
            P = np.column_stack([s.p for s in sols])
            return problem, params, U, P
    U, P = generate_snapshots(problem, params, config["output"]["jobs"])
    if write:
        os.makedirs(sdir, exist_ok=True)
        from .ins import FlowSolution

        mesh_hash = config.mesh().content_hash()
        for k, (f, mu) in enumerate(zip(files, params)):
            sol = FlowSolution(u=U[:, k], p=P[:, k], mu=mu,
                               newton_iterations=-1, residual_norm=0.0)
            save_flow_solution(sol, f, nu=config["physics"]["nu"], mesh_hash=mesh_hash)
    return problem, params, U, P


def cmd_snapshot(args):
    config = _config(args)
    outdir = _outdir(config)
    _, params, U, _ = _generate_or_load_snapshots(config, outdir)
    write_manifest(outdir, "snapshot", config,
                   extra={"n_snapshots": len(params), "snapshot_hash": array_hash(U)})
    print(f"wrote {len(params)} snapshots to {_snapshot_dir(outdir)}")
    return 0


def _artifact_path(outdir, method):
    return os.path.join(outdir, f"artifact-{method}.bin")


def cmd_train(args):
    from .bench import snapshot_sets
    from .podg import train_podg
    from .podi import train_podi

    overrides = {}
    if args.method:
        overrides["rom.method"] = args.method
    if args.n_rb:
        overrides["rom.n_rb"] = args.n_rb
    config = _config(args, **overrides)
    outdir = _outdir(config)
    problem, params, U, P = _generate_or_load_snapshots(config, outdir)
    ss_u, ss_p = snapshot_sets(problem, params, U, P)
    from windrom.bench import _podg_bases, _rank

    rom = config["rom"]
    path = _artifact_path(outdir, rom["method"])
    if rom["method"] == "podi":
        artifact = train_podi(ss_u, n_rb=min(rom["n_rb"], _rank(ss_u)),
                              kernel=rom["kernel"],
                              angle_embedding=rom["angle_embedding"],
                              polynomial=rom["polynomial"])
    else:
        # requested sizes are capped at the attainable snapshot ranks
        basis_lift, basis_p, lifting = _podg_bases(problem, ss_u, ss_p, rom["n_rb"])
        n_rb = min(rom["n_rb"], basis_lift.n_rb)
        artifact = train_podg(ss_u, ss_p, problem, n_rb=n_rb,
                              n_rb_p=min(rom["n_rb_pressure"] or n_rb, basis_p.n_rb),
                              n_deim=min(rom["n_deim"], _rank(ss_u)),
                              basis_u=basis_lift, basis_p=basis_p, lifting=lifting)
    artifact.save(path)
    with open(path, "rb") as fh:
        import hashlib

        digest = hashlib.sha256(fh.read()).hexdigest()
    write_manifest(outdir, "train", config,
                   extra={"artifact": os.path.basename(path), "artifact_hash": digest,
                          "snapshot_hash": ss_u.content_hash()})
    print(f"trained {rom['method']} artifact -> {path}")
    return 0


def cmd_evaluate(args):
    from .containers import write_container
    from .ins import ParameterPoint
    from .mesh import build_taylor_hood
    from .podi import PodiArtifact

    config = _config(args)
    outdir = _outdir(config)
    path = args.artifact or _artifact_path(outdir, "podi")
    artifact = PodiArtifact.load(path)
    two_param = artifact.pmap.has_direction
    if two_param and args.w_d is None:
        raise WindromError("this artifact is two-parameter; pass --w-d")
    mu = ParameterPoint(args.w_i, args.w_d if two_param else None)
    mesh = config.mesh()
    mesh_hash = mesh.content_hash()
    times = args.t if args.t else [config["physics"]["t_end"]]

    if args.field == "wind":
        u = artifact.evaluate(mu)
        out = os.path.join(outdir, f"wind-wi{args.w_i:g}" +
                           (f"-wd{args.w_d:g}" if args.w_d is not None else "") + ".bin")
        write_container(out, "wind-field",
                        {"w_i": mu.w_i, "w_d": mu.w_d, "mesh_hash": mesh_hash,
                         "extrapolation": artifact.is_extrapolation(mu)},
                        {"u": u})
        if args.plot:
            from .plots import plot_speed_field

            plot_speed_field(mesh, build_taylor_hood(mesh), u, out[:-4] + ".png")
    else:
        from .ad import export_series_csv, solve_ad
        from .ad import ConcentrationSeries

        wind = artifact.evaluate(mu)
        series = solve_ad(config.ad_problem(wind))
        sel = [series.at_time(t) for t in times]
        out = os.path.join(outdir, f"conc-wi{args.w_i:g}" +
                           (f"-wd{args.w_d:g}" if args.w_d is not None else "") + ".bin")
        write_container(out, "conc-series",
                        {"w_i": mu.w_i, "w_d": mu.w_d, "mesh_hash": mesh_hash,
                         "extrapolation": artifact.is_extrapolation(mu),
                         "source": series.source_meta},
                        {"times": np.asarray(times),
                         "fields": np.asarray(sel)})
        export_series_csv(
            ConcentrationSeries(times=np.asarray(times), fields=np.asarray(sel),
                                source_meta=series.source_meta),
            out[:-4] + ".csv")
        if args.plot:
            from .plots import plot_field

            for t, f in zip(times, sel):
                plot_field(mesh, f, out[:-4] + f"-t{t:g}.png",
                           title=f"concentration at t={t:g}s", vmin=0.0, vmax=1.0)
    write_manifest(outdir, "evaluate", config,
                   extra={"w_i": mu.w_i, "w_d": mu.w_d, "times": list(times),
                          "field": args.field, "output": os.path.basename(out)})
    print(f"wrote {out}")
    return 0


def cmd_bench(args):
    from . import bench
    from .plots import (plot_data_study, plot_error_curves, plot_extrapolation,
                        plot_speedup_curves)

    config = _config(args)
    outdir = _outdir(config)
    scfg = config.study_config()
    study = config["study"]
    if args.study == "compare":
        report = bench.run_comparison(scfg)
        plot_error_curves(report, os.path.join(outdir, "comparison-error.png"))
        plot_speedup_curves(report, os.path.join(outdir, "comparison-speedup.png"))
    elif args.study == "data-study":
        report = bench.run_data_study(scfg, study["snapshot_counts"])
        plot_data_study(report, os.path.join(outdir, "data-study.png"))
    else:
        train_range = study["train_range"]
        if train_range is None:
            lo, hi = config["parameters"]["w_i_range"]
            train_range = [lo, lo + 0.5 * (hi - lo)]
        report = bench.run_extrapolation_study(
            scfg, tuple(train_range), tuple(config["parameters"]["w_i_range"]))
        plot_extrapolation(report, os.path.join(outdir, "extrapolation.png"))
    table = os.path.join(outdir, f"{report.study}.tsv")
    report.write_table(table)
    report.write_raw(os.path.join(outdir, f"{report.study}-raw.json"))
    write_manifest(outdir, f"bench {args.study}", config,
                   extra={"table": os.path.basename(table),
                          "report_metadata": report.metadata})
    print(f"wrote {table}")
    return 0


def cmd_uq(args):
    from .containers import write_container
    from .plots import plot_field, plot_histogram
    from .podi import PodiArtifact
    from .uq import run_monte_carlo

    config = _config(args)
    outdir = _outdir(config)
    path = args.artifact or _artifact_path(outdir, "podi")
    artifact = PodiArtifact.load(path)
    spec = config.uncertainty_spec()
    times = [float(t) for t in config["uq"]["times"]]
    template = config.ad_problem(np.zeros(artifact.basis.modes.shape[0]))
    result = run_monte_carlo(artifact, template, spec, times)

    mesh = config.mesh()
    mesh_hash = mesh.content_hash()
    for t in times:
        stats = result.field_stats(t)
        for k in ("min", "mean", "max", "variance"):
            write_container(
                os.path.join(outdir, f"uq-{k}-t{t:g}.bin"), "uq-field",
                {"stat": k, "time": t, "seed": spec.seed,
                 "n_samples": spec.n_samples, "n_failed": result.n_failed,
                 "mesh_hash": mesh_hash},
                {"values": stats[k]})
        for k in ("min", "mean", "max"):
            plot_field(mesh, stats[k], os.path.join(outdir, f"uq-{k}-t{t:g}.png"),
                       title=f"{k} concentration at t={t:g}s", vmin=0.0, vmax=1.0)
    with open(os.path.join(outdir, "uq-histogram.csv"), "w") as fh:
        fh.write(f"# node {result.hv_node} at t={result.hv_time:g}\n")
        fh.write("sample,concentration\n")
        for k, v in enumerate(result.hv_histogram):
            fh.write(f"{k},{v!r}\n")
    plot_histogram(result.hv_histogram, os.path.join(outdir, "uq-histogram.png"),
                   title=f"node {result.hv_node}, t={result.hv_time:g}s")
    write_manifest(outdir, "uq", config,
                   extra={"seed": spec.seed, "n_samples": spec.n_samples,
                          "n_failed": result.n_failed, "hv_node": result.hv_node,
                          "times": times})
    print(f"UQ done: {spec.n_samples} samples, {result.n_failed} failed, "
          f"highest-variance node {result.hv_node}")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    overrides = {}
    port = args.port if args.port is not None else os.environ.get("WINDROM_PORT")
    if port is not None:
        overrides["service.port"] = int(port)
    config = _config(args, **overrides)
    outdir = _outdir(config)
    path = (args.artifact or os.environ.get("WINDROM_ARTIFACT")
            or _artifact_path(outdir, "podi"))
    app = create_app(config, path, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=config["service"]["port"], log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
