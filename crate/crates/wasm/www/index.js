import init, { approx_factor_curve, compare_selection, UavDemo } from '../pkg/ksched_wasm.js';

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guard(errId, f) {
  return () => {
    $(errId).textContent = '';
    try {
      f();
    } catch (e) {
      $(errId).textContent = e.message ?? String(e);
    }
  };
}

function plotFactor() {
  const curve = JSON.parse(approx_factor_curve(num('fc'), num('fn'), num('fk')));
  const cv = $('fcanvas');
  const g = cv.getContext('2d');
  const pad = 40;
  const w = cv.width - 2 * pad;
  const h = cv.height - 2 * pad;
  g.clearRect(0, 0, cv.width, cv.height);
  const lo = Math.log10(curve.points[0].eps);
  const hi = Math.log10(curve.points[curve.points.length - 1].eps);
  const x = (eps) => pad + ((Math.log10(eps) - lo) / (hi - lo)) * w;
  const y = (a) => pad + h - a * h;
  g.strokeStyle = '#888';
  g.strokeRect(pad, pad, w, h);
  g.fillStyle = '#444';
  g.fillText('log10 eps', pad + w / 2 - 20, cv.height - 8);
  g.fillText('alpha', 4, pad + h / 2);
  for (let t = Math.ceil(lo); t <= Math.floor(hi); t++) {
    g.fillText(String(t), x(10 ** t) - 6, pad + h + 14);
  }
  for (const a of [0, 0.5, 1]) g.fillText(String(a), pad - 22, y(a) + 4);
  g.setLineDash([4, 4]);
  g.strokeStyle = '#c60';
  g.beginPath();
  g.moveTo(pad, y(curve.alpha_greedy));
  g.lineTo(pad + w, y(curve.alpha_greedy));
  g.stroke();
  g.setLineDash([]);
  g.strokeStyle = '#06c';
  g.beginPath();
  curve.points.forEach((p, i) => (i ? g.lineTo(x(p.eps), y(p.alpha)) : g.moveTo(x(p.eps), y(p.alpha))));
  g.stroke();
  g.fillStyle = '#c60';
  g.fillText(`greedy factor ${curve.alpha_greedy.toFixed(3)}`, pad + 6, y(curve.alpha_greedy) - 6);
}

function runSelection() {
  const res = JSON.parse(compare_selection(num('sm'), num('sn'), num('sk'), num('se'), BigInt(num('ss'))));
  const rows = res.outcomes
    .map((o) => `<tr><td>${o.policy}</td><td>${o.mse.toFixed(4)}</td><td>${o.gain_evals}</td><td>${o.selected.length}</td></tr>`)
    .join('');
  $('stable').innerHTML =
    `<tr><th>policy</th><th>Tr(P)</th><th>gain evals</th><th>selected</th></tr>${rows}` +
    `<tr><td>prior</td><td>${res.trace_p_pred.toFixed(4)}</td><td></td><td></td></tr>`;
}

let demo = null;
let running = true;

function restartUav() {
  demo?.free();
  demo = new UavDemo($('up').value, num('ue'), num('ub'), BigInt(num('us')));
  drawFrame(JSON.parse(demo.frame()));
}

function drawFrame(f) {
  const cv = $('ucanvas');
  const g = cv.getContext('2d');
  const sx = cv.width / f.width;
  const sy = cv.height / f.height;
  const X = (p) => p[0] * sx;
  const Y = (p) => cv.height - p[1] * sy;
  g.clearRect(0, 0, cv.width, cv.height);
  g.lineWidth = 0.6;
  for (const l of f.links) {
    g.strokeStyle = l.range ? 'rgba(0,100,200,0.35)' : 'rgba(200,120,0,0.35)';
    const u = f.uavs[l.uav];
    const o = f.truth[l.object];
    g.beginPath();
    g.moveTo(X(u), Y(u));
    g.lineTo(X(o), Y(o));
    g.stroke();
  }
  g.lineWidth = 1;
  g.fillStyle = '#333';
  for (const u of f.uavs) g.fillRect(X(u) - 3, Y(u) - 3, 6, 6);
  f.truth.forEach((t, i) => {
    const e = f.estimate[i];
    g.strokeStyle = '#c00';
    g.beginPath();
    g.moveTo(X(t), Y(t));
    g.lineTo(X(e), Y(e));
    g.stroke();
    g.fillStyle = '#2a2';
    g.beginPath();
    g.arc(X(t), Y(t), 4, 0, 2 * Math.PI);
    g.fill();
    g.strokeStyle = '#c00';
    g.beginPath();
    g.arc(X(e), Y(e), 3, 0, 2 * Math.PI);
    g.stroke();
  });
  const mse = Number.isFinite(f.mse) ? f.mse.toFixed(4) : '-';
  $('uinfo').textContent = `step ${f.step}  candidates ${f.candidates}  used ${f.links.length}  sq. error ${mse}  mean Tr(P) ${f.mean_trace.toFixed(4)}`;
}

function tick() {
  if (running && demo) {
    try {
      drawFrame(JSON.parse(demo.step()));
    } catch (e) {
      $('uerr').textContent = e.message ?? String(e);
      running = false;
    }
  }
  setTimeout(tick, 150);
}

await init();
$('fgo').onclick = guard('ferr', plotFactor);
$('sgo').onclick = guard('serr', runSelection);
$('ugo').onclick = guard('uerr', restartUav);
$('urun').onclick = () => {
  running = !running;
  $('urun').textContent = running ? 'Pause' : 'Run';
};
guard('ferr', plotFactor)();
guard('serr', runSelection)();
guard('uerr', restartUav)();
tick();
