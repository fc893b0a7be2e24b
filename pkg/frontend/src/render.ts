// Field rendering and hover picking. Rasterization interpolates nodal
// values linearly over each triangle (matching the P1 field) and maps
// them through a fixed [0, 1] color scale; buildings are drawn as
// outlined holes. Picking returns the id of the nearest vertex of the
// triangle under the cursor, and the readout takes that node's value
// straight out of the server payload.

import type { MeshPayload } from "./api.js";

export interface Viewport {
  width: number;
  height: number;
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function fitViewport(mesh: MeshPayload, width: number, height: number,
                            margin = 10): Viewport {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (let i = 0; i < mesh.n_vertices; i++) {
    const x = mesh.vertices[2 * i], y = mesh.vertices[2 * i + 1];
    if (x < minX) minX = x;
    if (x > maxX) maxX = x;
    if (y < minY) minY = y;
    if (y > maxY) maxY = y;
  }
  const scale = Math.min((width - 2 * margin) / (maxX - minX),
                         (height - 2 * margin) / (maxY - minY));
  return {
    width, height, scale,
    offsetX: margin - minX * scale,
    offsetY: height - margin + minY * scale,  // y axis points up
  };
}

export function toPixel(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.offsetX + x * vp.scale, vp.offsetY - y * vp.scale];
}

export function toDomain(vp: Viewport, px: number, py: number): [number, number] {
  return [(px - vp.offsetX) / vp.scale, (vp.offsetY - py) / vp.scale];
}

// viridis anchors, linearly interpolated; fixed [0, 1] input range
const VIRIDIS: [number, number, number][] = [
  [68, 1, 84], [71, 44, 122], [59, 81, 139], [44, 113, 142],
  [33, 144, 141], [39, 173, 129], [92, 200, 99], [170, 220, 50],
  [253, 231, 37],
];

export function colormap(value: number): [number, number, number] {
  const v = Math.min(1, Math.max(0, value));
  const t = v * (VIRIDIS.length - 1);
  const i = Math.min(VIRIDIS.length - 2, Math.floor(t));
  const f = t - i;
  const a = VIRIDIS[i], b = VIRIDIS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

function barycentric(
  x: number, y: number,
  x0: number, y0: number, x1: number, y1: number, x2: number, y2: number,
): [number, number, number] {
  const det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2);
  const l0 = ((y1 - y2) * (x - x2) + (x2 - x1) * (y - y2)) / det;
  const l1 = ((y2 - y0) * (x - x2) + (x0 - x2) * (y - y2)) / det;
  return [l0, l1, 1 - l0 - l1];
}

/** Rasterize nodal values into an RGBA buffer (row-major, width*height*4).
 * Pixels outside the mesh stay transparent. */
export function rasterize(mesh: MeshPayload, values: Float64Array,
                          vp: Viewport): Uint8ClampedArray<ArrayBuffer> {
  const buf = new Uint8ClampedArray(new ArrayBuffer(vp.width * vp.height * 4));
  const eps = 1e-9;
  for (let c = 0; c < mesh.n_triangles; c++) {
    const n0 = mesh.triangles[3 * c], n1 = mesh.triangles[3 * c + 1],
          n2 = mesh.triangles[3 * c + 2];
    const [px0, py0] = toPixel(vp, mesh.vertices[2 * n0], mesh.vertices[2 * n0 + 1]);
    const [px1, py1] = toPixel(vp, mesh.vertices[2 * n1], mesh.vertices[2 * n1 + 1]);
    const [px2, py2] = toPixel(vp, mesh.vertices[2 * n2], mesh.vertices[2 * n2 + 1]);
    const xMin = Math.max(0, Math.floor(Math.min(px0, px1, px2)));
    const xMax = Math.min(vp.width - 1, Math.ceil(Math.max(px0, px1, px2)));
    const yMin = Math.max(0, Math.floor(Math.min(py0, py1, py2)));
    const yMax = Math.min(vp.height - 1, Math.ceil(Math.max(py0, py1, py2)));
    for (let py = yMin; py <= yMax; py++) {
      for (let px = xMin; px <= xMax; px++) {
        const [l0, l1, l2] = barycentric(px + 0.5, py + 0.5,
                                         px0, py0, px1, py1, px2, py2);
        if (l0 < -eps || l1 < -eps || l2 < -eps) continue;
        const value = l0 * values[n0] + l1 * values[n1] + l2 * values[n2];
        const [r, g, b] = colormap(value);
        const o = 4 * (py * vp.width + px);
        buf[o] = r; buf[o + 1] = g; buf[o + 2] = b; buf[o + 3] = 255;
      }
    }
  }
  return buf;
}

export interface Pick {
  nodeId: number;
  x: number;
  y: number;
}

/** Triangle-walk picking: the node returned is the nearest vertex of the
 * triangle containing the domain point, or null outside the mesh. */
export function pickNode(mesh: MeshPayload, x: number, y: number): Pick | null {
  const eps = 1e-9;
  for (let c = 0; c < mesh.n_triangles; c++) {
    const n = [mesh.triangles[3 * c], mesh.triangles[3 * c + 1],
               mesh.triangles[3 * c + 2]];
    const lam = barycentric(
      x, y,
      mesh.vertices[2 * n[0]], mesh.vertices[2 * n[0] + 1],
      mesh.vertices[2 * n[1]], mesh.vertices[2 * n[1] + 1],
      mesh.vertices[2 * n[2]], mesh.vertices[2 * n[2] + 1]);
    if (lam[0] < -eps || lam[1] < -eps || lam[2] < -eps) continue;
    let best = 0;
    if (lam[1] > lam[best]) best = 1;
    if (lam[2] > lam[best]) best = 2;
    const id = n[best];
    return { nodeId: id, x: mesh.vertices[2 * id], y: mesh.vertices[2 * id + 1] };
  }
  return null;
}
