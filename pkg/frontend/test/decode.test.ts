import { describe, expect, it } from "vitest";

import { decodeFloat64, decodeInt64 } from "../src/api.js";

function encodeFloat64(values: number[]): string {
  const buf = new ArrayBuffer(8 * values.length);
  const view = new DataView(buf);
  values.forEach((v, i) => view.setFloat64(8 * i, v, true));
  return Buffer.from(buf).toString("base64");
}

function encodeInt64(values: number[]): string {
  const buf = new ArrayBuffer(8 * values.length);
  const view = new DataView(buf);
  values.forEach((v, i) => view.setBigInt64(8 * i, BigInt(v), true));
  return Buffer.from(buf).toString("base64");
}

describe("payload float decoding", () => {
  it("round-trips doubles bit for bit", () => {
    const values = [0.1, -0.0, 1e-308, 0.6366197723675814, 2 ** -1074,
                    Math.PI, 1 + Number.EPSILON];
    const decoded = decodeFloat64(encodeFloat64(values));
    expect(decoded.length).toBe(values.length);
    values.forEach((v, i) => {
      expect(Object.is(decoded[i], v)).toBe(true);  // bit-identical, -0 included
    });
  });

  it("hover readout takes the exact payload element", () => {
    // the readout is values[nodeId]; indexing must not perturb the double
    const values = [0.30000000000000004, 0.1 + 0.2];
    const decoded = decodeFloat64(encodeFloat64(values));
    const nodeId = 1;
    expect(Object.is(decoded[nodeId], 0.1 + 0.2)).toBe(true);
  });

  it("decodes int64 triangle indices", () => {
    const decoded = decodeInt64(encodeInt64([0, 7, 123456]));
    expect(Array.from(decoded)).toEqual([0, 7, 123456]);
  });
});
