// View state and the request pipeline: parameter changes are debounced
// into at most one in-flight evaluation per control settle, and stale
// responses are dropped by comparing monotonically increasing request
// ids. The UI never computes field values itself; it renders whatever
// the server returned.

import type { ConcentrationPayload, HealthBounds } from "./api.js";

export interface HoverReadout {
  nodeId: number;
  x: number;
  y: number;
  value: number;
}

export interface ViewState {
  wI: number;
  wD: number;
  timeIndex: number;
  times: number[];
  colorScale: [number, number];
  hover: HoverReadout | null;
  status: "idle" | "pending" | "error";
  extrapolation: boolean;
  field: ConcentrationPayload | null;
}

export function initialViewState(bounds: HealthBounds): ViewState {
  const [lo, hi] = bounds.w_i;
  const nTimes = Math.round(bounds.t_end / bounds.dt);
  const times: number[] = [];
  for (let k = 1; k <= nTimes; k++) times.push(k * bounds.dt);
  return {
    wI: 0.5 * (lo + hi),
    wD: bounds.w_d ? 0.5 * (bounds.w_d[0] + bounds.w_d[1]) : 0,
    timeIndex: times.length - 1,
    times,
    colorScale: [0, 1],
    hover: null,
    status: "idle",
    extrapolation: false,
    field: null,
  };
}

export function sliderRanges(bounds: HealthBounds) {
  return {
    wI: { min: bounds.w_i[0], max: bounds.w_i[1] },
    wD: bounds.two_parameter ? { min: 0, max: 360 } : null,
    time: { min: 0, max: bounds.t_end },
  };
}

export type Scheduler = (fn: () => void, ms: number) => unknown;
export type Canceller = (handle: unknown) => void;

/** Trailing-edge debounce: rapid calls collapse into one invocation
 * `waitMs` after the last change. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
  schedule: Scheduler = (f, ms) => setTimeout(f, ms),
  cancel: Canceller = (h) => clearTimeout(h as ReturnType<typeof setTimeout>),
): (...args: A) => void {
  let handle: unknown = null;
  return (...args: A) => {
    if (handle !== null) cancel(handle);
    handle = schedule(() => {
      handle = null;
      fn(...args);
    }, waitMs);
  };
}

/** Issues requests with increasing ids and ignores responses that
 * arrive after a newer request has been issued. */
export class RequestSequencer<T> {
  private nextId = 0;
  private latestIssued = -1;
  private latestApplied = -1;

  issue(): number {
    this.latestIssued = this.nextId++;
    return this.latestIssued;
  }

  /** True when the response for `id` is current and should be applied. */
  accept(id: number): boolean {
    if (id !== this.latestIssued || id <= this.latestApplied) {
      return false;
    }
    this.latestApplied = id;
    return true;
  }
}

export const DEBOUNCE_MS = 150;
