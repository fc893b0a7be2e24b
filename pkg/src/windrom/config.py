"""Pipeline configuration: one TOML file drives every CLI command.

Schema (all sections optional unless a command needs them):

    [mesh]       source = "synthetic" | "file"
                 block_rows, block_cols, street_width, refine_level, outer,
                 width, height          (synthetic)
                 path, format           (file)
    [physics]    nu, kappa, t_end, dt, source_center, source_radius,
                 source_amplitude
    [parameters] w_i_range, n_train, n_test,
                 w_d_range, n_train_direction, n_test_direction  (two-parameter)
    [rom]        method, n_rb, n_rb_pressure, n_deim, kernel,
                 angle_embedding, polynomial
    [study]      n_rb_sweep = [lo, hi], methods, timing_reps,
                 snapshot_counts, train_range
    [uq]         w_i_mean, w_i_half_width, w_d_mean, w_d_half_width,
                 n_samples, times
    [service]    port, cache_size, quantize_w_i, quantize_w_d, max_workers,
                 uq_sample_ceiling
    [output]     directory, seed, jobs

Flags on the command line override the corresponding fields.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .containers import canonical_json, json_hash
from .errors import ConfigError
from .ins import ParameterPoint
from .mesh import load_mesh, synth_urban_mesh

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


_DEFAULTS = {
    "mesh": {"source": "synthetic", "block_rows": 2, "block_cols": 2,
             "street_width": 0.15, "refine_level": 2, "outer": "south-inflow",
             "width": 1.0, "height": 1.0, "path": None, "format": None},
    "physics": {"nu": 0.15, "kappa": 1e-3, "t_end": 100.0, "dt": 1.0,
                "source_center": [0.25, 0.25], "source_radius": 0.12,
                "source_amplitude": 1.0},
    "parameters": {"w_i_range": [0.5, 20.0], "n_train": 50, "n_test": 20,
                   "w_d_range": None, "n_train_direction": 36, "n_test_direction": 8},
    "rom": {"method": "podi", "n_rb": 20, "n_rb_pressure": None, "n_deim": 20,
            "kernel": "tps", "angle_embedding": True, "polynomial": False},
    "study": {"n_rb_sweep": [1, 20], "methods": ["podg", "podi"], "timing_reps": 5,
              "snapshot_counts": [25, 50, 75, 100], "train_range": None},
    "uq": {"w_i_mean": 4.0, "w_i_half_width": 0.2, "w_d_mean": 97.0,
           "w_d_half_width": 10.0, "n_samples": 500, "times": [100.0]},
    "service": {"port": 8451, "cache_size": 256, "quantize_w_i": 0.05,
                "quantize_w_d": 0.5, "max_workers": 4, "uq_sample_ceiling": 2000},
    "output": {"directory": "out", "seed": 0, "jobs": 1},
}


@dataclass
class PipelineConfig:
    data: dict
    path: str | None = None
    _mesh_cache: object = field(default=None, compare=False, repr=False)

    def __getitem__(self, section):
        return self.data[section]

    def hash(self):
        return json_hash(self.data)

    # -- derived objects -----------------------------------------------------

    def mesh(self):
        if self._mesh_cache is None:
            m = self.data["mesh"]
            if m["source"] == "synthetic":
                self._mesh_cache = synth_urban_mesh(
                    m["block_rows"], m["block_cols"], m["street_width"],
                    refine_level=m["refine_level"], width=m["width"],
                    height=m["height"], outer=m["outer"])
            else:
                base = os.path.dirname(self.path or ".")
                path = m["path"] if os.path.isabs(m["path"]) else os.path.join(base, m["path"])
                self._mesh_cache = load_mesh(path, format=m["format"])
        return self._mesh_cache

    @property
    def two_parameter(self):
        return self.data["parameters"]["w_d_range"] is not None

    def training_parameters(self):
        p = self.data["parameters"]
        wis = np.linspace(*p["w_i_range"], p["n_train"])
        if not self.two_parameter:
            return [ParameterPoint(w) for w in wis]
        lo, hi = p["w_d_range"]
        # direction grid excludes the periodic endpoint when spanning 360
        n_d = p["n_train_direction"]
        full = abs((hi - lo) - 360.0) < 1e-9
        wds = np.linspace(lo, hi, n_d, endpoint=not full)
        return [ParameterPoint(w, d % 360.0) for w in wis for d in wds]

    def test_parameters(self):
        p = self.data["parameters"]
        phi = 0.5 * (np.sqrt(5.0) - 1.0)
        lo, hi = p["w_i_range"]
        step = (hi - lo) / p["n_test"]
        wis = [lo + (k + phi) * step for k in range(p["n_test"])]
        if not self.two_parameter:
            return [ParameterPoint(w) for w in wis]
        dlo, dhi = p["w_d_range"]
        dstep = (dhi - dlo) / p["n_test_direction"]
        wds = [dlo + (k + phi) * dstep for k in range(p["n_test_direction"])]
        return [ParameterPoint(w, d % 360.0) for w in wis for d in wds]

    def uncertainty_spec(self):
        from .uq import UncertaintySpec

        u = self.data["uq"]
        return UncertaintySpec(
            w_i_mean=u["w_i_mean"], w_i_half_width=u["w_i_half_width"],
            w_d_mean=u["w_d_mean"], w_d_half_width=u["w_d_half_width"],
            n_samples=u["n_samples"], seed=self.data["output"]["seed"],
            two_parameter=self.two_parameter)

    def ad_problem(self, wind):
        from .ad import AdProblem, gaussian_source

        ph = self.data["physics"]
        mesh = self.mesh()
        initial = gaussian_source(mesh, ph["source_center"], ph["source_radius"],
                                  ph["source_amplitude"])
        return AdProblem(mesh=mesh, wind=wind, kappa=ph["kappa"], initial=initial,
                         t_end=ph["t_end"], dt=ph["dt"],
                         source_meta={"center": list(ph["source_center"]),
                                      "radius": ph["source_radius"],
                                      "amplitude": ph["source_amplitude"]})

    def study_config(self):
        from .bench import StudyConfig

        s = self.data["study"]
        p = self.data["parameters"]
        lo, hi = s["n_rb_sweep"]
        return StudyConfig(
            mesh=self.mesh(), nu=self.data["physics"]["nu"],
            w_i_range=tuple(p["w_i_range"]), n_train=p["n_train"], n_test=p["n_test"],
            n_rb_sweep=tuple(range(lo, hi + 1)),
            n_rb_pressure=self.data["rom"]["n_rb_pressure"],
            n_deim=self.data["rom"]["n_deim"],
            methods=tuple(s["methods"]), timing_reps=s["timing_reps"],
            seed=self.data["output"]["seed"], jobs=self.data["output"]["jobs"])


def load_config(path, overrides=None):
    """Parse and validate a TOML pipeline config; flags override fields."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse failure: {exc}") from None
    return build_config(raw, path=path, overrides=overrides)


def build_config(raw, path=None, overrides=None):
    data = {}
    for section, defaults in _DEFAULTS.items():
        given = raw.get(section, {})
        unknown = set(given) - set(defaults)
        if unknown:
            raise ConfigError("unknown key", field=f"{section}.{sorted(unknown)[0]}")
        data[section] = {**defaults, **given}
    unknown_sections = set(raw) - set(_DEFAULTS)
    if unknown_sections:
        raise ConfigError("unknown section", field=sorted(unknown_sections)[0])
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        if section not in data or key not in data[section]:
            raise ConfigError("unknown override", field=dotted)
        data[section][key] = value
    _validate(data, path)
    return PipelineConfig(data=data, path=path)


def _validate(data, path):
    def check(cond, field_path, message):
        if not cond:
            raise ConfigError(message, field=field_path)

    m = data["mesh"]
    check(m["source"] in ("synthetic", "file"), "mesh.source", "must be 'synthetic' or 'file'")
    if m["source"] == "file":
        check(m["path"], "mesh.path", "required when mesh.source = 'file'")
        base = os.path.dirname(path or ".")
        full = m["path"] if os.path.isabs(m["path"]) else os.path.join(base, m["path"])
        check(os.path.exists(full), "mesh.path", f"file does not exist: {full}")
    else:
        check(m["block_rows"] >= 1 and m["block_cols"] >= 1, "mesh.block_rows",
              "block counts must be >= 1")
        check(m["street_width"] > 0, "mesh.street_width", "must be positive")

    ph = data["physics"]
    check(ph["nu"] > 0, "physics.nu", "viscosity must be positive")
    check(ph["kappa"] > 0, "physics.kappa", "diffusivity must be positive")
    check(ph["dt"] > 0 and ph["t_end"] >= ph["dt"], "physics.dt",
          "need dt > 0 and t_end >= dt")

    p = data["parameters"]
    lo, hi = p["w_i_range"]
    check(0 <= lo < hi, "parameters.w_i_range", "need 0 <= lo < hi")
    check(p["n_train"] >= 1 and p["n_test"] >= 1, "parameters.n_train", "counts must be >= 1")
    if p["w_d_range"] is not None:
        dlo, dhi = p["w_d_range"]
        check(dlo < dhi and dhi - dlo <= 360.0, "parameters.w_d_range",
              "need lo < hi with span <= 360")

    r = data["rom"]
    check(r["method"] in ("podi", "podg"), "rom.method", "must be 'podi' or 'podg'")
    check(r["n_rb"] >= 1, "rom.n_rb", "must be >= 1")
    check(r["kernel"] == "tps", "rom.kernel", "only 'tps' is available")

    s = data["study"]
    lo, hi = s["n_rb_sweep"]
    check(1 <= lo <= hi, "study.n_rb_sweep", "need 1 <= lo <= hi")
    check(all(mth in ("podi", "podg") for mth in s["methods"]), "study.methods",
          "entries must be 'podi' or 'podg'")
    check(list(s["snapshot_counts"]) == sorted(s["snapshot_counts"]),
          "study.snapshot_counts", "must be ascending")

    u = data["uq"]
    check(u["n_samples"] >= 1, "uq.n_samples", "must be >= 1")
    check(u["w_i_half_width"] >= 0 and u["w_d_half_width"] >= 0,
          "uq.w_i_half_width", "half-widths must be nonnegative")
    check(len(u["times"]) >= 1, "uq.times", "need at least one output time")

    o = data["output"]
    check(o["jobs"] >= 1, "output.jobs", "must be >= 1")


def write_manifest(outdir, command, config, extra=None):
    """Deterministic run manifest: enough to re-run the command identically."""
    import scipy

    manifest = {
        "command": command,
        "config": config.data,
        "config_hash": config.hash(),
        "seed": config.data["output"]["seed"],
        "versions": {
            "windrom": _version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    manifest.update(extra or {})
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        fh.write(canonical_json(manifest))
    return path


def _version():
    from . import __version__

    return __version__
