// Typed client for the windrom service. All field payloads carry nodal
// values as base64-encoded little-endian float64; decoding goes through
// DataView so the doubles survive bit-for-bit.

export interface HealthBounds {
  w_i: [number, number];
  w_d: [number, number] | null;
  two_parameter: boolean;
  t_end: number;
  dt: number;
}

export interface Health {
  status: string;
  artifact_hash: string;
  mesh_hash: string;
  cache_size: number;
  bounds: HealthBounds;
}

export interface MeshPayload {
  hash: string;
  n_vertices: number;
  n_triangles: number;
  vertices: Float64Array;   // (n, 2) flattened
  triangles: Int32Array;    // (m, 3) flattened
  outlines: number[][];     // hole vertex loops
}

export interface ConcentrationPayload {
  times: number[];
  fields: Float64Array[];   // one per time
  valueRange: [number, number];
  extrapolation: boolean;
}

export function decodeFloat64(b64: string): Float64Array {
  const raw = atob(b64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  const view = new DataView(bytes.buffer);
  const out = new Float64Array(raw.length / 8);
  for (let i = 0; i < out.length; i++) out[i] = view.getFloat64(8 * i, true);
  return out;
}

export function decodeInt64(b64: string): Int32Array {
  const raw = atob(b64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  const view = new DataView(bytes.buffer);
  const out = new Int32Array(raw.length / 8);
  for (let i = 0; i < out.length; i++) {
    // the service writes int64; indices fit comfortably in 32 bits
    out[i] = Number(view.getBigInt64(8 * i, true));
  }
  return out;
}

export class ApiClient {
  constructor(private base: string = "") {}

  async health(): Promise<Health> {
    const res = await fetch(`${this.base}/health`);
    if (!res.ok) throw new Error(`health failed: ${res.status}`);
    return res.json();
  }

  async mesh(): Promise<MeshPayload> {
    const res = await fetch(`${this.base}/mesh`);
    if (!res.ok) throw new Error(`mesh failed: ${res.status}`);
    const body = await res.json();
    return {
      hash: body.hash,
      n_vertices: body.n_vertices,
      n_triangles: body.n_triangles,
      vertices: decodeFloat64(body.vertices),
      triangles: decodeInt64(body.triangles),
      outlines: body.outlines,
    };
  }

  async evaluateConcentration(
    wI: number, wD: number | null, times: number[],
  ): Promise<ConcentrationPayload> {
    const body: Record<string, unknown> = {
      w_i: wI, times, field: "concentration",
    };
    if (wD !== null) body.w_d = wD;
    const res = await fetch(`${this.base}/evaluate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      throw new Error(`evaluate failed: ${res.status}`);
    }
    const payload = await res.json();
    return {
      times: payload.times,
      fields: payload.values.map((v: string) => decodeFloat64(v)),
      valueRange: payload.value_range,
      extrapolation: payload.extrapolation,
    };
  }
}
