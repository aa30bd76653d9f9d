/** DOM and canvas rendering for the operator console. No framework, no
 * local state: every paint reads straight out of the DashboardModel.
 */

import { DashboardModel } from "./model.js";
import { CommandPayload, formatClock } from "./protocol.js";

export interface CaseSummary {
  substations: { id: number; name: string; lat: number; lon: number; bus_ids: number[] }[];
  areas: { id: number; name: string; substation_ids: number[] }[];
  buses: { id: number; name: string; base_kv: number; type: string; substation_id: number }[];
  branches: {
    id: number; from_bus: number; to_bus: number; from_sub: number; to_sub: number;
    is_transformer: boolean; mva_limit: number; tap_min: number; tap_max: number;
  }[];
  generators: { id: number; bus: number; p_min: number; p_max: number }[];
  loads: { id: number; bus: number; p_nominal: number }[];
  shunts: { id: number; bus: number; q_nominal: number }[];
}

export type IssueCommand = (payload: CommandPayload) => void;

const fmt = (x: number, digits = 1) =>
  x === undefined || Number.isNaN(x) ? "-" : x.toFixed(digits);

export function renderAreaCards(el: HTMLElement, model: DashboardModel,
                                summary: CaseSummary | null, simStart: number): void {
  const rows: string[] = [];
  for (const [id, a] of [...model.areas.entries()].sort((x, y) => x[0] - y[0])) {
    const name = summary?.areas.find((ar) => ar.id === id)?.name || `Area ${id}`;
    rows.push(`
      <div class="card ${a.blackout ? "blackout" : ""}">
        <h3>${name} ${a.blackout ? "BLACKOUT" : ""}</h3>
        <div class="kv"><span>Clock</span><b>${formatClock(simStart, model.simTime)}</b></div>
        <div class="kv"><span>Generation</span><b>${fmt(a.gen_mw)} MW</b></div>
        <div class="kv"><span>Load</span><b>${fmt(a.load_mw)} MW</b></div>
        <div class="kv"><span>Export</span><b>${fmt(a.export_mw)} / ${fmt(a.sched_export_mw)} MW</b></div>
        <div class="kv"><span>Freq dev</span><b>${fmt(a.freq_dev_hz, 3)} Hz</b></div>
        <div class="kv"><span>ACE</span><b>${fmt(a.ace_mw)} MW</b></div>
        <div class="kv"><span>Score</span><b>${fmt(a.score, 2)}</b></div>
        <div class="kv"><span>Cost</span><b>$${fmt(a.cost_usd, 2)}</b></div>
      </div>`);
  }
  el.innerHTML = rows.join("") || "<p>waiting for area data…</p>";
}

export function renderViolationsTable(el: HTMLElement, model: DashboardModel): void {
  const bus = model.violations.bus.map(
    ([id, v, kind]) => `<tr><td>bus ${id}</td><td>${kind}-voltage</td><td>${fmt(v, 4)} pu</td></tr>`);
  const branch = model.violations.branch.map(
    ([id, pct]) => `<tr><td>branch ${id}</td><td>overload</td><td>${fmt(pct)} %</td></tr>`);
  const all = [...bus, ...branch];
  el.innerHTML = all.length
    ? `<table><thead><tr><th>element</th><th>kind</th><th>value</th></tr></thead>
       <tbody>${all.join("")}</tbody></table>`
    : "<p class='ok'>no violations</p>";
}

export function renderNotifications(el: HTMLElement, model: DashboardModel): void {
  const rows = model.notifications.slice(-12).reverse().map((n) =>
    `<div class="notif ${n.severity}">[${n.severity}] ${escapeHtml(n.text)}</div>`);
  el.innerHTML = rows.join("");
}

export function renderStripChart(canvas: HTMLCanvasElement, model: DashboardModel): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, w, h);
  const vLo = 0.9, vHi = 1.1;
  const y = (v: number) => h - ((v - vLo) / (vHi - vLo)) * h;
  for (const band of [0.95, 1.05]) {
    ctx.strokeStyle = "#664444";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(0, y(band));
    ctx.lineTo(w, y(band));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  const tEnd = model.simTime;
  const tStart = tEnd - 60;
  const palette = ["#7fd1ff", "#ffd27f", "#9fff9f", "#ff9fd5", "#d5b3ff"];
  let color = 0;
  for (const [busId, ring] of model.strip) {
    ctx.strokeStyle = palette[color % palette.length];
    ctx.beginPath();
    let started = false;
    for (const s of ring) {
      const x = ((s.t - tStart) / 60) * w;
      if (!started) {
        ctx.moveTo(x, y(s.v));
        started = true;
      } else {
        ctx.lineTo(x, y(s.v));
      }
    }
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(`bus ${busId}`, 6, 12 + 12 * color);
    color += 1;
  }
}

export interface MapGeometry {
  toXY(lat: number, lon: number): [number, number];
  hit(x: number, y: number): number | null; // substation id
}

export function renderMap(canvas: HTMLCanvasElement, model: DashboardModel,
                          summary: CaseSummary | null): MapGeometry | null {
  const ctx = canvas.getContext("2d");
  if (!ctx || !summary) return null;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#0c1018";
  ctx.fillRect(0, 0, w, h);

  const lats = summary.substations.map((s) => s.lat);
  const lons = summary.substations.map((s) => s.lon);
  const pad = 30;
  const latMin = Math.min(...lats), latMax = Math.max(...lats);
  const lonMin = Math.min(...lons), lonMax = Math.max(...lons);
  const toXY = (lat: number, lon: number): [number, number] => [
    pad + ((lon - lonMin) / Math.max(lonMax - lonMin, 1e-9)) * (w - 2 * pad),
    h - pad - ((lat - latMin) / Math.max(latMax - latMin, 1e-9)) * (h - 2 * pad),
  ];
  const subById = new Map(summary.substations.map((s) => [s.id, s]));

  // contour heat layer under everything, when the storm is on
  if (model.contour) {
    const { rows, cols, bbox, values } = model.contour;
    let vmax = 0;
    for (const row of values) for (const v of row) vmax = Math.max(vmax, v);
    for (let r = 0; r < rows; r++) {
      for (let c = 0; c < cols; c++) {
        const lat = bbox[0] + ((bbox[2] - bbox[0]) * r) / Math.max(rows - 1, 1);
        const lon = bbox[1] + ((bbox[3] - bbox[1]) * c) / Math.max(cols - 1, 1);
        const [x, yy] = toXY(lat, lon);
        const a = vmax > 0 ? values[r][c] / vmax : 0;
        ctx.fillStyle = `rgba(255, ${Math.round(140 - 90 * a)}, 40, ${0.12 + 0.3 * a})`;
        ctx.fillRect(x - 14, yy - 14, 28, 28);
      }
    }
  }

  for (const br of summary.branches) {
    const a = subById.get(br.from_sub);
    const b = subById.get(br.to_sub);
    if (!a || !b || a.id === b.id) continue;
    const live = model.branches.get(br.id);
    const [x1, y1] = toXY(a.lat, a.lon);
    const [x2, y2] = toXY(b.lat, b.lon);
    const loading = live?.loading_pct ?? 0;
    ctx.strokeStyle = !live?.closed ? "#444c5c"
      : loading > 100 ? "#ff5050"
      : loading > 80 ? "#ffb050" : "#5c88a8";
    ctx.lineWidth = loading > 100 ? 3 : 1.5;
    ctx.setLineDash(live?.closed === false ? [3, 5] : []);
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  const violated = new Set(model.violations.bus.map(([id]) => id));
  for (const s of summary.substations) {
    const [x, yv] = toXY(s.lat, s.lon);
    const bad = s.bus_ids.some((b) => violated.has(b));
    ctx.fillStyle = model.blackout ? "#333" : bad ? "#ff5050" : "#d8e6f2";
    ctx.beginPath();
    ctx.arc(x, yv, 6, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#9ab";
    ctx.fillText(s.name, x + 8, yv - 6);
  }

  // transformer GIC scatter: size by |neutral current|, color by sign
  if (model.gmdTransformers.length && model.contour) {
    const branchById = new Map(summary.branches.map((b) => [b.id, b]));
    for (const t of model.gmdTransformers) {
      const br = branchById.get(t.id);
      const sub = br ? subById.get(br.from_sub) : undefined;
      if (!sub) continue;
      const [x, yv] = toXY(sub.lat, sub.lon);
      const r = Math.min(4 + Math.abs(t.neutral_a) / 8, 22);
      ctx.fillStyle = t.neutral_a >= 0 ? "rgba(80,220,120,0.55)" : "rgba(90,140,255,0.55)";
      ctx.beginPath();
      ctx.arc(x, yv, r, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  return {
    toXY,
    hit(x: number, yv: number) {
      for (const s of summary.substations) {
        const [sx, sy] = toXY(s.lat, s.lon);
        if ((sx - x) ** 2 + (sy - yv) ** 2 <= 100) return s.id;
      }
      return null;
    },
  };
}

export function renderGenTable(el: HTMLElement, model: DashboardModel,
                               summary: CaseSummary | null, issue: IssueCommand): void {
  const rows: string[] = [];
  for (const g of [...model.gens.values()].sort((a, b) => a.id - b.id)) {
    const meta = summary?.generators.find((x) => x.id === g.id);
    rows.push(`
      <tr data-gen="${g.id}" class="${g.online ? "" : "offline"}">
        <td>G${g.id}${meta ? ` @ bus ${meta.bus}` : ""}</td>
        <td>${fmt(g.p_mw)}</td>
        <td><input class="mw" data-gen="${g.id}" value="${fmt(g.p_target_mw)}" size="6"></td>
        <td>${fmt(g.q_mvar)}</td>
        <td><input class="vset" data-gen="${g.id}" value="${fmt(g.v_set, 3)}" size="5"></td>
        <td>${g.online ? "online" : "offline"}</td>
        <td>
          <button data-cmd="${g.online ? "DecommitGen" : "CommitGen"}" data-gen="${g.id}">
            ${g.online ? "decommit" : "commit"}
          </button>
        </td>
      </tr>`);
  }
  el.innerHTML = `<table>
    <thead><tr><th>unit</th><th>P (MW)</th><th>P setpoint</th><th>Q (Mvar)</th>
    <th>V setpoint</th><th>status</th><th></th></tr></thead>
    <tbody>${rows.join("")}</tbody></table>`;

  el.querySelectorAll<HTMLInputElement>("input.mw").forEach((input) => {
    input.addEventListener("change", () => {
      issue({ kind: "SetGenMW", target: Number(input.dataset.gen), value: Number(input.value) });
    });
  });
  el.querySelectorAll<HTMLInputElement>("input.vset").forEach((input) => {
    input.addEventListener("change", () => {
      issue({ kind: "SetGenVoltageSetpoint", target: Number(input.dataset.gen),
              value: Number(input.value) });
    });
  });
  el.querySelectorAll<HTMLButtonElement>("button[data-cmd]").forEach((btn) => {
    btn.addEventListener("click", () => {
      issue({ kind: btn.dataset.cmd as any, target: Number(btn.dataset.gen) });
    });
  });
}

export function renderCapacityPie(canvas: HTMLCanvasElement, model: DashboardModel,
                                  summary: CaseSummary | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !summary) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  let online = 0, offline = 0, current = 0;
  for (const g of model.gens.values()) {
    const meta = summary.generators.find((x) => x.id === g.id);
    if (!meta) continue;
    if (g.online) {
      online += meta.p_max;
      current += g.p_mw;
    } else {
      offline += meta.p_max;
    }
  }
  const total = online + offline || 1;
  const slices: [number, string, string][] = [
    [current, "#7fd1ff", `dispatch ${current.toFixed(0)} MW`],
    [Math.max(online - current, 0), "#3d6f8f", `online headroom ${(online - current).toFixed(0)} MW`],
    [offline, "#50586a", `offline ${offline.toFixed(0)} MW`],
  ];
  let angle = -Math.PI / 2;
  const cx = w / 3, cy = h / 2, r = Math.min(w, h) / 2 - 8;
  slices.forEach(([value, color]) => {
    const span = (value / total) * Math.PI * 2;
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.arc(cx, cy, r, angle, angle + span);
    ctx.fill();
    angle += span;
  });
  ctx.fillStyle = "#cfd8e3";
  slices.forEach(([, color, label], i) => {
    ctx.fillStyle = color;
    ctx.fillRect(w * 0.62, 16 + i * 18, 10, 10);
    ctx.fillStyle = "#cfd8e3";
    ctx.fillText(label, w * 0.62 + 16, 25 + i * 18);
  });
}

export function renderShuntTable(el: HTMLElement, model: DashboardModel,
                                 summary: CaseSummary | null, issue: IssueCommand): void {
  if (!summary) {
    el.innerHTML = "<p>waiting for case…</p>";
    return;
  }
  const rows = summary.shunts.map((s) => `
    <tr><td>shunt ${s.id} @ bus ${s.bus}</td><td>${fmt(s.q_nominal)} Mvar</td>
      <td>
        <button data-on="${s.id}">on</button>
        <button data-off="${s.id}">off</button>
      </td></tr>`);
  el.innerHTML = `<table><thead><tr><th>bank</th><th>size</th><th>switch</th></tr></thead>
    <tbody>${rows.join("")}</tbody></table>`;
  el.querySelectorAll<HTMLButtonElement>("button[data-on]").forEach((b) =>
    b.addEventListener("click", () =>
      issue({ kind: "SwitchShuntOn", target: Number(b.dataset.on) })));
  el.querySelectorAll<HTMLButtonElement>("button[data-off]").forEach((b) =>
    b.addEventListener("click", () =>
      issue({ kind: "SwitchShuntOff", target: Number(b.dataset.off) })));
}

export function renderGicTables(el: HTMLElement, model: DashboardModel): void {
  if (!model.gmdTransformers.length) {
    el.innerHTML = "<p class='ok'>no geomagnetic activity</p>";
    return;
  }
  const rows = model.gmdTransformers.map((t) => `
    <tr><td>xfmr ${t.id}</td><td>${fmt(t.neutral_a)} A</td>
        <td>${fmt(t.temp_c)} °C</td><td>${fmt(t.q_loss_mvar)} Mvar</td></tr>`);
  el.innerHTML = `
    <p>field |E| = ${fmt(model.gmdField?.mag_v_per_km ?? 0, 2)} V/km</p>
    <table><thead><tr><th>transformer</th><th>winding GIC</th><th>hot spot</th>
    <th>extra Q loss</th></tr></thead><tbody>${rows.join("")}</tbody></table>`;
}

export function renderScoreCurve(canvas: HTMLCanvasElement, report: any): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !report?.series) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, w, h);
  const times: number[] = report.series.sim_time;
  const scores: number[] = report.series.score;
  if (!times?.length) return;
  const t0 = times[0], t1 = times[times.length - 1] || 1;
  const x = (t: number) => ((t - t0) / Math.max(t1 - t0, 1e-9)) * (w - 20) + 10;
  const y = (s: number) => h - 14 - (s / 100) * (h - 28);
  ctx.strokeStyle = "#7fd1ff";
  ctx.beginPath();
  times.forEach((t, i) => (i ? ctx.lineTo(x(t), y(scores[i])) : ctx.moveTo(x(t), y(scores[i]))));
  ctx.stroke();
  // action markers along the curve, triangle per recorded operator action
  ctx.fillStyle = "#4f9cff";
  for (const action of report.action_log ?? []) {
    const t = action.sim_time;
    let idx = times.findIndex((tt) => tt >= t);
    if (idx < 0) idx = times.length - 1;
    const px = x(times[idx]), py = y(scores[idx]);
    ctx.beginPath();
    ctx.moveTo(px, py - 10);
    ctx.lineTo(px - 5, py - 2);
    ctx.lineTo(px + 5, py - 2);
    ctx.fill();
  }
  ctx.fillStyle = "#cfd8e3";
  ctx.fillText(`final score ${report.final_score?.toFixed?.(2)}`, 12, 14);
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" }[ch] as string));
}
