import { describe, expect, it } from "vitest";

import type { HealthBounds } from "../src/api.js";
import { initialViewState, sliderRanges } from "../src/state.js";

const twoParam: HealthBounds = {
  w_i: [0.0001, 12.0],
  w_d: [0.0, 350.0],
  two_parameter: true,
  t_end: 100.0,
  dt: 1.0,
};

describe("slider bounds mirror /health", () => {
  it("speed slider range equals the artifact bounds", () => {
    const ranges = sliderRanges(twoParam);
    expect(ranges.wI).toEqual({ min: 0.0001, max: 12.0 });
    expect(ranges.time).toEqual({ min: 0, max: 100.0 });
  });

  it("direction dial covers the full circle in two-parameter mode", () => {
    expect(sliderRanges(twoParam).wD).toEqual({ min: 0, max: 360 });
  });

  it("one-parameter artifacts hide the direction control", () => {
    const ranges = sliderRanges({ ...twoParam, w_d: null, two_parameter: false });
    expect(ranges.wD).toBeNull();
  });

  it("initial state sits inside the bounds with the time grid from dt", () => {
    const state = initialViewState(twoParam);
    expect(state.wI).toBeGreaterThanOrEqual(twoParam.w_i[0]);
    expect(state.wI).toBeLessThanOrEqual(twoParam.w_i[1]);
    expect(state.times.length).toBe(100);
    expect(state.times[state.times.length - 1]).toBe(100.0);
    expect(state.colorScale).toEqual([0, 1]);
  });
});
