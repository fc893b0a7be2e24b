// Dashboard wiring: sliders drive debounced evaluations against the
// service, the canvas renders whichever frame the time slider selects,
// and hovering reads the exact nodal value out of the current payload.

import { ApiClient, MeshPayload } from "./api.js";
import { DEBOUNCE_MS, RequestSequencer, ViewState, debounce,
         initialViewState, sliderRanges } from "./state.js";
import { colormap, fitViewport, pickNode, rasterize, toPixel } from "./render.js";

const api = new ApiClient("");  // same-origin service; set a base URL here otherwise

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot() {
  const health = await api.health();
  const mesh = await api.mesh();
  const state = initialViewState(health.bounds);
  const ranges = sliderRanges(health.bounds);

  const canvas = el<HTMLCanvasElement>("field");
  const ctx = canvas.getContext("2d")!;
  const vp = fitViewport(mesh, canvas.width, canvas.height);

  const wISlider = el<HTMLInputElement>("w-i");
  const wINumber = el<HTMLInputElement>("w-i-value");
  wISlider.min = String(ranges.wI.min);
  wISlider.max = String(ranges.wI.max);
  wISlider.step = "0.01";
  wISlider.value = String(state.wI);
  wINumber.value = wISlider.value;

  const wDSlider = el<HTMLInputElement>("w-d");
  const wDNumber = el<HTMLInputElement>("w-d-value");
  const dialNeedle = el<HTMLElement>("dial-needle");
  if (ranges.wD) {
    wDSlider.min = String(ranges.wD.min);
    wDSlider.max = String(ranges.wD.max);
    wDSlider.step = "0.5";
    wDSlider.value = String(state.wD);
    wDNumber.value = wDSlider.value;
  } else {
    el<HTMLElement>("direction-row").style.display = "none";
  }

  const timeSlider = el<HTMLInputElement>("time");
  const timeLabel = el<HTMLElement>("time-label");
  const frameTimes = pickFrameTimes(state.times);
  timeSlider.min = "0";
  timeSlider.max = String(frameTimes.length - 1);
  timeSlider.step = "1";
  timeSlider.value = String(frameTimes.length - 1);

  const status = el<HTMLElement>("status");
  const warning = el<HTMLElement>("extrapolation-warning");
  const readout = el<HTMLElement>("readout");
  const sequencer = new RequestSequencer();

  function render() {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const idx = Number(timeSlider.value);
    timeLabel.textContent = `t = ${frameTimes[idx]} s`;
    if (!state.field) return;
    const values = state.field.fields[idx];
    const rgba = rasterize(mesh, values, vp);
    ctx.putImageData(new ImageData(rgba, vp.width, vp.height), 0, 0);
    drawOutlines(ctx, mesh, vp);
    drawColorbar(ctx, canvas.width - 30, 20, 14, canvas.height - 40);
    warning.style.display = state.extrapolation ? "inline" : "none";
  }

  async function requestField() {
    const id = sequencer.issue();
    state.status = "pending";
    status.textContent = "evaluating...";
    try {
      const wD = ranges.wD ? Number(wDSlider.value) : null;
      const payload = await api.evaluateConcentration(
        Number(wISlider.value), wD, frameTimes);
      if (!sequencer.accept(id)) return;  // a newer request superseded this one
      state.field = payload;
      state.extrapolation = payload.extrapolation;
      state.status = "idle";
      status.textContent = "ready";
      render();
    } catch (err) {
      if (!sequencer.accept(id)) return;
      state.status = "error";
      status.textContent = `request failed: ${err}`;
    }
  }

  const debouncedRequest = debounce(requestField, DEBOUNCE_MS);

  function onParameterChange() {
    wINumber.value = wISlider.value;
    if (ranges.wD) {
      wDNumber.value = wDSlider.value;
      dialNeedle.style.transform =
        `rotate(${90 - Number(wDSlider.value)}deg)`;
    }
    debouncedRequest();
  }

  wISlider.addEventListener("input", onParameterChange);
  wDSlider.addEventListener("input", onParameterChange);
  wINumber.addEventListener("change", () => {
    wISlider.value = wINumber.value;
    onParameterChange();
  });
  wDNumber.addEventListener("change", () => {
    wDSlider.value = wDNumber.value;
    onParameterChange();
  });
  timeSlider.addEventListener("input", render);

  canvas.addEventListener("mousemove", (ev) => {
    if (!state.field) return;
    const rect = canvas.getBoundingClientRect();
    const [x, y] = [ev.clientX - rect.left, ev.clientY - rect.top];
    const [dx, dy] = [(x - vp.offsetX) / vp.scale, (vp.offsetY - y) / vp.scale];
    const pick = pickNode(mesh, dx, dy);
    if (!pick) {
      readout.textContent = "";
      return;
    }
    const idx = Number(timeSlider.value);
    const value = state.field.fields[idx][pick.nodeId];  // exact payload value
    readout.textContent =
      `node ${pick.nodeId} (${pick.x.toFixed(1)}, ${pick.y.toFixed(1)} m): ` +
      `c = ${value}`;
  });

  render();
  requestField();
}

function pickFrameTimes(times: number[], maxFrames = 25): number[] {
  if (times.length <= maxFrames) return times;
  const stride = Math.ceil(times.length / maxFrames);
  const out = times.filter((_, k) => k % stride === 0);
  if (out[out.length - 1] !== times[times.length - 1]) {
    out.push(times[times.length - 1]);
  }
  return out;
}

function drawOutlines(ctx: CanvasRenderingContext2D, mesh: MeshPayload,
                      vp: ReturnType<typeof fitViewport>) {
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 1.5;
  for (const loop of mesh.outlines) {
    ctx.beginPath();
    loop.forEach((node, k) => {
      const [px, py] = toPixel(vp, mesh.vertices[2 * node], mesh.vertices[2 * node + 1]);
      if (k === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.closePath();
    ctx.stroke();
  }
}

function drawColorbar(ctx: CanvasRenderingContext2D, x: number, y: number,
                      w: number, h: number) {
  for (let i = 0; i < h; i++) {
    const [r, g, b] = colormap(1 - i / (h - 1));
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.fillRect(x, y + i, w, 1);
  }
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText("1", x - 10, y + 10);
  ctx.fillText("0", x - 10, y + h);
}

boot().catch((err) => {
  const banner = document.getElementById("status");
  if (banner) banner.textContent = `failed to start: ${err}`;
});
