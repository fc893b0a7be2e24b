import { describe, expect, it } from "vitest";

import type { MeshPayload } from "../src/api.js";
import { colormap, fitViewport, pickNode, rasterize, toDomain,
         toPixel } from "../src/render.js";

function squareMesh(): MeshPayload {
  // unit square split along the main diagonal
  return {
    hash: "t",
    n_vertices: 4,
    n_triangles: 2,
    vertices: new Float64Array([0, 0, 1, 0, 1, 1, 0, 1]),
    triangles: new Int32Array([0, 1, 2, 0, 2, 3]),
    outlines: [],
  };
}

describe("picking", () => {
  it("returns the nearest vertex of the containing triangle", () => {
    const mesh = squareMesh();
    expect(pickNode(mesh, 0.9, 0.55)!.nodeId).toBe(2);
    expect(pickNode(mesh, 0.05, 0.1)!.nodeId).toBe(0);
    expect(pickNode(mesh, 0.1, 0.9)!.nodeId).toBe(3);
  });

  it("returns null outside the mesh", () => {
    expect(pickNode(squareMesh(), 2.0, 2.0)).toBeNull();
    expect(pickNode(squareMesh(), -0.2, 0.5)).toBeNull();
  });

  it("reports the picked node's coordinates", () => {
    const p = pickNode(squareMesh(), 0.9, 0.55)!;
    expect([p.x, p.y]).toEqual([1, 1]);
  });
});

describe("viewport transforms", () => {
  it("round-trips pixel and domain coordinates", () => {
    const vp = fitViewport(squareMesh(), 200, 160);
    const [px, py] = toPixel(vp, 0.3, 0.7);
    const [x, y] = toDomain(vp, px, py);
    expect(x).toBeCloseTo(0.3, 12);
    expect(y).toBeCloseTo(0.7, 12);
  });

  it("keeps the mesh inside the canvas", () => {
    const vp = fitViewport(squareMesh(), 200, 160, 10);
    for (const [x, y] of [[0, 0], [1, 0], [1, 1], [0, 1]] as const) {
      const [px, py] = toPixel(vp, x, y);
      expect(px).toBeGreaterThanOrEqual(9.5);
      expect(px).toBeLessThanOrEqual(200 - 9.5);
      expect(py).toBeGreaterThanOrEqual(9.5);
      expect(py).toBeLessThanOrEqual(160 - 9.5);
    }
  });
});

describe("field rasterization", () => {
  it("uses the fixed [0, 1] color scale end to end", () => {
    expect(colormap(0)).toEqual([68, 1, 84]);
    expect(colormap(1)).toEqual([253, 231, 37]);
    expect(colormap(-5)).toEqual(colormap(0));   // clamped
    expect(colormap(7)).toEqual(colormap(1));
  });

  it("paints interior pixels with interpolated colors", () => {
    const mesh = squareMesh();
    const vp = fitViewport(mesh, 64, 64, 2);
    const uniform = rasterize(mesh, new Float64Array([0.5, 0.5, 0.5, 0.5]), vp);
    const [px, py] = toPixel(vp, 0.5, 0.5);
    const o = 4 * (Math.round(py) * vp.width + Math.round(px));
    const expected = colormap(0.5);
    expect([uniform[o], uniform[o + 1], uniform[o + 2]]).toEqual(expected);
    expect(uniform[o + 3]).toBe(255);
  });

  it("leaves pixels outside the mesh transparent", () => {
    const mesh = squareMesh();
    const vp = fitViewport(mesh, 64, 64, 6);
    const buf = rasterize(mesh, new Float64Array(4), vp);
    expect(buf[3]).toBe(0);  // top-left corner is in the margin
  });
});
