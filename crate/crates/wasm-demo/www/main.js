import init, { SceneParams, planLevels, distortionCurve, transmitScene } from "./pkg/iaq_wasm_demo.js";

const SIDE = 224;
const GRID = 14;
const M_MAX = 8;
const $ = (id) => document.getElementById(id);
const sliders = ["rho", "gamma", "mu", "spread"];
let center = [6.5, 6.5];

function params() {
  return new SceneParams(
    Number($("rho").value),
    Number($("gamma").value),
    Number($("mu").value),
    $("solver").value,
    center[0],
    center[1],
    Number($("spread").value),
    BigInt($("seed").value || 0),
  );
}

function putRgba(canvas, bytes) {
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(bytes), SIDE, SIDE), 0, 0);
}

function drawLevels(bits) {
  const ctx = $("levels").getContext("2d");
  const cell = SIDE / GRID;
  bits.forEach((m, i) => {
    const g = Math.round((m * 255) / M_MAX);
    ctx.fillStyle = `rgb(${g},${g},${g})`;
    ctx.fillRect((i % GRID) * cell, Math.floor(i / GRID) * cell, cell, cell);
    ctx.fillStyle = g > 128 ? "#000" : "#fff";
    ctx.font = "9px monospace";
    ctx.fillText(String(m), (i % GRID) * cell + 5, Math.floor(i / GRID) * cell + 11);
  });
}

function drawCurve(mu) {
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 10, w - pad - 10, h - pad - 10);
  const series = [
    [distortionCurve(0), "#888"],
    [distortionCurve(mu), "#c33"],
  ];
  const lo = Math.log10(series[0][0][M_MAX]);
  const y = (v) => 10 + ((0 - Math.log10(v)) / (0 - lo)) * (h - pad - 20);
  const x = (m) => pad + (m / M_MAX) * (w - pad - 20);
  for (const [values, color] of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    values.forEach((v, m) => (m ? ctx.lineTo(x(m), y(v)) : ctx.moveTo(x(m), y(v))));
    ctx.stroke();
  }
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  for (let m = 0; m <= M_MAX; m += 2) ctx.fillText(String(m), x(m) - 3, h - 8);
  ctx.fillStyle = "#c33";
  ctx.fillText(`μ = ${mu}`, w - 80, 26);
  ctx.fillStyle = "#888";
  ctx.fillText("μ = 0", w - 80, 40);
}

function update() {
  for (const id of sliders) $(id).nextElementSibling.textContent = $(id).value;
  const status = $("status");
  status.className = "";
  try {
    const p = params();
    const plan = planLevels(p);
    drawLevels(plan.bits);
    const pixels = transmitScene(p);
    putRgba($("scene"), pixels.subarray(0, SIDE * SIDE * 4));
    putRgba($("received"), pixels.subarray(SIDE * SIDE * 4));
    drawCurve(Number($("mu").value));
    status.textContent =
      `ρ = ${plan.rho.toFixed(4)}   payload = ${plan.payloadBits} bits   ` +
      `weighted distortion = ${plan.objective.toExponential(4)}`;
  } catch (err) {
    status.className = "error";
    status.textContent = String(err);
  }
}

await init();
for (const id of [...sliders, "solver", "seed"]) $(id).addEventListener("input", update);
$("scene").addEventListener("click", (e) => {
  const rect = e.target.getBoundingClientRect();
  center = [((e.clientX - rect.left) / rect.width) * GRID - 0.5, ((e.clientY - rect.top) / rect.height) * GRID - 0.5];
  update();
});
update();
