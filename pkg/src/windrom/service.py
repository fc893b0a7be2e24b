"""HTTP service: wind/concentration evaluations and UQ summaries.

The app is a plain FastAPI application around immutable loaded artifacts.
Field payloads carry nodal values as base64-encoded little-endian 64-bit
floats inside a JSON envelope; identical requests produce byte-identical
payloads, and a quantized LRU cache reuses responses for parameters that
agree after rounding to the configured steps. Per-request transport
solves run under a bounded semaphore; a saturated service answers 503.
"""

from __future__ import annotations

import base64
import json
import threading
import time
from collections import OrderedDict

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from .ad import solve_ad
from .containers import canonical_json
from .errors import WindromError
from .fem import FemWorkspace
from .ins import ParameterPoint
from .mesh import build_taylor_hood
from .podi import PodiArtifact
from .uq import UncertaintySpec, run_monte_carlo


def encode_floats(arr):
    """Base64 little-endian float64 payload encoding."""
    a = np.ascontiguousarray(np.asarray(arr, dtype=float))
    return base64.b64encode(a.astype("<f8", copy=False).tobytes()).decode("ascii")


def decode_floats(blob):
    return np.frombuffer(base64.b64decode(blob), dtype="<f8").copy()


class LruCache:
    def __init__(self, capacity):
        self.capacity = capacity
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            if key not in self._data:
                return None
            self._data.move_to_end(key)
            return self._data[key]

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def __len__(self):
        return len(self._data)


class ServiceState:
    """Loaded artifacts plus the solver plumbing shared by all requests."""

    def __init__(self, config, podi_path):
        self.config = config
        try:
            self.artifact = PodiArtifact.load(podi_path)
        except (OSError, WindromError) as exc:
            raise WindromError(f"cannot load artifact {podi_path}: {exc}") from exc
        self.mesh = config.mesh()
        self.space = build_taylor_hood(self.mesh)
        self.workspace = FemWorkspace(self.space)
        if self.artifact.basis.modes.shape[0] != self.space.n_velocity_dofs:
            raise WindromError("artifact does not match the configured mesh")
        svc = config["service"]
        self.cache = LruCache(svc["cache_size"])
        self.quantize = (svc["quantize_w_i"], svc["quantize_w_d"])
        self.workers = threading.BoundedSemaphore(svc["max_workers"])
        self.uq_ceiling = svc["uq_sample_ceiling"]
        self.started = time.monotonic()
        self.mesh_hash = self.mesh.content_hash()
        self.t_end = config["physics"]["t_end"]

    # -- evaluation helpers (shared with the CLI for bitwise equivalence) -----

    def wind_field(self, mu):
        return self.artifact.evaluate(mu)

    def concentration_fields(self, mu, times):
        wind = self.artifact.evaluate(mu)
        problem = self.config.ad_problem(wind)
        series = solve_ad(problem, space=self.space, workspace=self.workspace)
        return np.asarray([series.at_time(t) for t in times])

    def cache_key(self, w_i, w_d, times, field):
        qi, qd = self.quantize
        ki = round(w_i / qi) if qi > 0 else w_i
        kd = None if w_d is None else (round(w_d / qd) if qd > 0 else w_d)
        return (ki, kd, tuple(times), field)


def _bad_request(message, field=None):
    body = {"error": message}
    if field:
        body["field"] = field
    return Response(content=canonical_json(body), status_code=400,
                    media_type="application/json")


def _unprocessable(message):
    return Response(content=canonical_json({"error": message}), status_code=422,
                    media_type="application/json")


def create_app(config, podi_path, static_dir=None):
    """Build the service; raises immediately when artifacts cannot load."""
    state = ServiceState(config, podi_path)
    app = FastAPI(title="windrom service")
    app.state.windrom = state
    request_counter = {"n": 0}

    @app.middleware("http")
    async def access_log(request, call_next):
        request_counter["n"] += 1
        rid = request_counter["n"]
        t0 = time.perf_counter()
        response = await call_next(request)
        elapsed = time.perf_counter() - t0
        print(f"[windrom-service] id={rid} {request.method} {request.url.path} "
              f"status={response.status_code} time={elapsed * 1e3:.1f}ms")
        return response

    @app.get("/health")
    def health():
        art = state.artifact
        return {
            "status": "ready",
            "artifact_hash": art.basis.snapshot_hash,
            "mesh_hash": state.mesh_hash,
            "uptime_s": time.monotonic() - state.started,
            "cache_size": len(state.cache),
            "bounds": {
                "w_i": list(art.pmap.w_i_bounds),
                "w_d": None if art.pmap.w_d_bounds is None else list(art.pmap.w_d_bounds),
                "two_parameter": art.pmap.has_direction,
                "t_end": state.t_end,
                "dt": config["physics"]["dt"],
            },
        }

    @app.get("/mesh")
    def mesh_payload():
        outer, holes = state.mesh.boundary_loops()
        return {
            "hash": state.mesh_hash,
            "n_vertices": state.mesh.n_vertices,
            "n_triangles": state.mesh.n_triangles,
            "vertices": encode_floats(state.mesh.vertices.ravel()),
            "triangles": base64.b64encode(
                state.mesh.triangles.astype("<i8").tobytes()).decode("ascii"),
            "outer_loop": [int(v) for v in outer],
            "outlines": [[int(v) for v in loop] for loop in holes],
        }

    @app.post("/evaluate")
    async def evaluate(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _bad_request("request body is not valid JSON")
        err = _validate_evaluate(body, state)
        if err is not None:
            return err
        w_i = float(body["w_i"])
        w_d = body.get("w_d")
        w_d = None if w_d is None else float(w_d)
        field = body.get("field", "wind")
        times = [float(t) for t in body.get("times", [state.t_end])]
        stream = bool(body.get("stream", False))

        two_param = state.artifact.pmap.has_direction
        if two_param and w_d is None:
            return _bad_request("this artifact needs w_d", field="w_d")
        mu = ParameterPoint(w_i, w_d if two_param else None)
        print(f"[windrom-service] id={request_counter['n']} evaluate "
              f"w_i={w_i} w_d={w_d} field={field} times={times}")

        key = state.cache_key(w_i, w_d, times, field)
        if not stream:
            cached = state.cache.get(key)
            if cached is not None:
                return Response(content=cached, media_type="application/json")

        if not state.workers.acquire(blocking=False):
            return Response(content=canonical_json({"error": "service saturated"}),
                            status_code=503, media_type="application/json")
        try:
            if field == "wind":
                u = state.wind_field(mu)
                nodal = state.space.velocity_nodal(u)
                payload = {
                    "field": "wind",
                    "mesh_hash": state.mesh_hash,
                    "extrapolation": state.artifact.is_extrapolation(mu),
                    "w_i": w_i, "w_d": w_d,
                    "ux": encode_floats(nodal[:, 0]),
                    "uy": encode_floats(nodal[:, 1]),
                    "value_range": [float(np.hypot(*nodal.T).min()),
                                    float(np.hypot(*nodal.T).max())],
                }
            else:
                fields = state.concentration_fields(mu, times)
                if stream:
                    return _stream_concentration(state, mu, times, fields, w_i, w_d)
                payload = {
                    "field": "concentration",
                    "mesh_hash": state.mesh_hash,
                    "extrapolation": state.artifact.is_extrapolation(mu),
                    "w_i": w_i, "w_d": w_d,
                    "times": times,
                    "values": [encode_floats(f) for f in fields],
                    "value_range": [float(fields.min()), float(fields.max())],
                }
        except WindromError as exc:
            opaque = abs(hash((w_i, w_d, tuple(times)))) % 10 ** 8
            print(f"[windrom-service] error id={opaque}: {exc}")
            return Response(content=canonical_json({"error": "internal solver failure",
                                                    "id": opaque}),
                            status_code=500, media_type="application/json")
        finally:
            state.workers.release()

        blob = canonical_json(payload)
        state.cache.put(key, blob)
        return Response(content=blob, media_type="application/json")

    @app.post("/uq")
    async def uq(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _bad_request("request body is not valid JSON")
        n = body.get("n_samples", 100)
        if not isinstance(n, int) or n < 1:
            return _bad_request("n_samples must be a positive integer", field="n_samples")
        if n > state.uq_ceiling:
            return _unprocessable(f"n_samples exceeds the ceiling {state.uq_ceiling}")
        times = body.get("times", [state.t_end])
        bad = [t for t in times if not 0 <= float(t) <= state.t_end]
        if bad:
            return _unprocessable(f"times out of range: {bad}")

        defaults = state.config["uq"]
        spec = UncertaintySpec(
            w_i_mean=float(body.get("w_i_mean", defaults["w_i_mean"])),
            w_i_half_width=float(body.get("w_i_half_width", defaults["w_i_half_width"])),
            w_d_mean=float(body.get("w_d_mean", defaults["w_d_mean"])),
            w_d_half_width=float(body.get("w_d_half_width", defaults["w_d_half_width"])),
            n_samples=n,
            seed=int(body.get("seed", state.config["output"]["seed"])),
            two_parameter=state.artifact.pmap.has_direction,
        )
        if not state.workers.acquire(blocking=False):
            return Response(content=canonical_json({"error": "service saturated"}),
                            status_code=503, media_type="application/json")
        try:
            template = state.config.ad_problem(np.zeros(state.space.n_velocity_dofs))
            result = run_monte_carlo(state.artifact, template, spec,
                                     times=[float(t) for t in times],
                                     workspace=state.workspace)
        except WindromError as exc:
            return Response(content=canonical_json({"error": str(exc)}),
                            status_code=500, media_type="application/json")
        finally:
            state.workers.release()

        payload = {
            "mesh_hash": state.mesh_hash,
            "seed": spec.seed,
            "n_samples": spec.n_samples,
            "n_failed": result.n_failed,
            "times": result.times,
            "fields": {
                str(t): {k: encode_floats(v) for k, v in result.field_stats(t).items()}
                for t in result.times
            },
            "hv_node": result.hv_node,
            "hv_time": result.hv_time,
            "hv_histogram": encode_floats(result.hv_histogram),
            "hv_trace_exact": result.hv_trace_exact,
            "degenerate_variance": result.degenerate_variance,
        }
        return Response(content=canonical_json(payload), media_type="application/json")

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")
    return app


def _validate_evaluate(body, state):
    if not isinstance(body, dict):
        return _bad_request("request body must be a JSON object")
    if "w_i" not in body:
        return _bad_request("missing required field", field="w_i")
    for key in ("w_i", "w_d"):
        v = body.get(key)
        if v is not None and not isinstance(v, (int, float)):
            return _bad_request(f"{key} must be a number", field=key)
    if body.get("w_i") is not None and not np.isfinite(body["w_i"]):
        return _bad_request("w_i must be finite", field="w_i")
    field = body.get("field", "wind")
    if field not in ("wind", "concentration"):
        return _bad_request("field must be 'wind' or 'concentration'", field="field")
    times = body.get("times", [state.t_end])
    if not isinstance(times, list) or not times:
        return _bad_request("times must be a nonempty list", field="times")
    if any(not isinstance(t, (int, float)) for t in times):
        return _bad_request("times entries must be numbers", field="times")
    dt = state.config["physics"]["dt"]
    out = [t for t in times if not 0 <= float(t) <= state.t_end + 1e-9]
    offgrid = [t for t in times if abs(t / dt - round(t / dt)) > 1e-9]
    if out:
        return _unprocessable(f"times out of range [0, {state.t_end}]: {out}")
    if offgrid:
        return _unprocessable(f"times not on the dt={dt} grid: {offgrid}")
    return None


def _stream_concentration(state, mu, times, fields, w_i, w_d):
    head = canonical_json({
        "field": "concentration", "mesh_hash": state.mesh_hash,
        "extrapolation": state.artifact.is_extrapolation(mu),
        "w_i": w_i, "w_d": w_d, "times": times,
        "value_range": [float(fields.min()), float(fields.max())],
    })

    def gen():
        yield head + "\n"
        for t, f in zip(times, fields):
            yield canonical_json({"t": t, "values": encode_floats(f)}) + "\n"

    return StreamingResponse(gen(), media_type="application/x-ndjson")
