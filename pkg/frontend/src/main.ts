/** Console bootstrap: token screen, page switching, live wiring. */

import { ConsoleClient } from "./client.js";
import { DashboardModel } from "./model.js";
import {
  CaseSummary,
  renderAreaCards,
  renderCapacityPie,
  renderGenTable,
  renderGicTables,
  renderMap,
  renderNotifications,
  renderScoreCurve,
  renderShuntTable,
  renderStripChart,
  renderViolationsTable,
} from "./render.js";
import { CommandPayload, TOPICS } from "./protocol.js";

const model = new DashboardModel();
let summary: CaseSummary | null = null;
let simStart = 0;
let client: ConsoleClient | null = null;
let mapGeometry: ReturnType<typeof renderMap> = null;
let selectedSubstation: number | null = null;

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function issue(payload: CommandPayload): void {
  // fire and forget: the engine's next data step is the only thing
  // allowed to change what the tables show
  client?.issueCommand(payload);
}

function paint(): void {
  const page = document.querySelector<HTMLElement>(".page.active")?.dataset.page;
  renderNotifications($("notifications"), model);
  if (page === "overview") {
    renderAreaCards($("area-cards"), model, summary, simStart);
    renderViolationsTable($("violations"), model);
    renderStripChart($("strip") as HTMLCanvasElement, model);
    mapGeometry = renderMap($("map") as HTMLCanvasElement, model, summary);
    renderSubstationDetail();
  } else if (page === "generation") {
    // leave the table alone while the operator is mid-edit in one of its cells
    const editing = document.activeElement?.closest?.("#gen-table") != null &&
      document.activeElement?.tagName === "INPUT";
    if (!editing) renderGenTable($("gen-table"), model, summary, issue);
    renderCapacityPie($("capacity-pie") as HTMLCanvasElement, model, summary);
    const area = [...model.areas.values()][0];
    $("cost-line").textContent = area
      ? `accrued cost $${area.cost_usd.toFixed(2)}  |  score ${area.score.toFixed(2)}`
      : "";
  } else if (page === "shunts") {
    renderShuntTable($("shunt-table"), model, summary, issue);
    renderViolationsTable($("shunt-violations"), model);
  } else if (page === "gic") {
    mapGeometry = renderMap($("gic-map") as HTMLCanvasElement, model, summary);
    renderGicTables($("gic-tables"), model);
  } else if (page === "report") {
    renderScoreCurve($("score-curve") as HTMLCanvasElement, model.report);
    $("report-summary").textContent = model.report?.summary ?? "report not published yet";
  }
  document.body.classList.toggle("blackout", model.blackout);
}

function renderSubstationDetail(): void {
  const el = $("substation-detail");
  if (selectedSubstation === null || !summary) {
    el.classList.add("hidden");
    return;
  }
  const sub = summary.substations.find((s) => s.id === selectedSubstation);
  if (!sub) return;
  const busRows = sub.bus_ids.map((busId) => {
    const idx = model.busIds.indexOf(busId);
    const v = idx >= 0 ? model.busV[idx] : NaN;
    const gens = summary!.generators.filter((g) => g.bus === busId);
    const loads = summary!.loads.filter((l) => l.bus === busId);
    const shunts = summary!.shunts.filter((s) => s.bus === busId);
    return `<tr><td>bus ${busId}</td><td>${Number.isNaN(v) ? "-" : v.toFixed(4)} pu</td>
      <td>${gens.map((g) => `G${g.id}`).join(" ") || "-"}</td>
      <td>${loads.map((l) => `L${l.id}`).join(" ") || "-"}</td>
      <td>${shunts.map((s) => `S${s.id}`).join(" ") || "-"}</td></tr>`;
  });
  el.classList.remove("hidden");
  el.innerHTML = `<h3>${sub.name} <button id="close-detail">×</button></h3>
    <table><thead><tr><th>bus</th><th>V</th><th>gens</th><th>loads</th><th>shunts</th></tr></thead>
    <tbody>${busRows.join("")}</tbody></table>`;
  document.getElementById("close-detail")?.addEventListener("click", () => {
    selectedSubstation = null;
    paint();
  });
}

function connect(token: string): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const url = `${proto}://${location.host}/ws?token=${encodeURIComponent(token)}`;
  client = new ConsoleClient(
    url,
    {
      onResync: () => {
        model.clear();
        summary = null;
        paint();
      },
      onEnvelope: (env) => {
        if (env.topic === TOPICS.notifAlarm || env.topic === TOPICS.notifCommand) {
          flashBanner(env.payload?.severity ?? "info", env.payload?.text ?? "");
        }
        if (env.topic === "data/case") {
          summary = env.payload as CaseSummary;
        } else {
          model.apply(env);
        }
        paint();
      },
      onStatus: (s) => ($("conn-status").textContent = s),
      onError: (text) => flashBanner("warning", text),
    },
    (u) => new WebSocket(u) as any,
    ["data/#", "notif/#"],
  );
  client.connect();
  $("token-screen").classList.add("hidden");
  $("console").classList.remove("hidden");
}

function flashBanner(severity: string, text: string): void {
  const banner = $("banner");
  banner.textContent = text;
  banner.className = `banner show ${severity}`;
  setTimeout(() => banner.classList.remove("show"), 4000);
}

function wireStaticUi(): void {
  $("connect-btn").addEventListener("click", () => {
    const token = (document.getElementById("token-input") as HTMLInputElement).value.trim();
    if (token) connect(token);
  });
  document.querySelectorAll<HTMLElement>(".nav button").forEach((btn) => {
    btn.addEventListener("click", () => {
      document.querySelectorAll(".page").forEach((p) => p.classList.remove("active"));
      document.querySelector(`.page[data-page="${btn.dataset.target}"]`)?.classList.add("active");
      paint();
    });
  });
  ($("map") as HTMLCanvasElement).addEventListener("click", (ev) => {
    const rect = (ev.target as HTMLCanvasElement).getBoundingClientRect();
    const hit = mapGeometry?.hit(ev.clientX - rect.left, ev.clientY - rect.top);
    if (hit != null) {
      selectedSubstation = hit;
      paint();
    }
  });
  $("fetch-report").addEventListener("click", () => {
    client?.sendRaw({ topic: TOPICS.commandReportFetch, payload: {} });
  });
  $("download-report").addEventListener("click", () => {
    if (!model.report) return;
    const blob = new Blob([JSON.stringify(model.report, null, 2)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "gridops-report.json";
    a.click();
  });
  const speed = document.getElementById("replay-speed") as HTMLInputElement;
  speed?.addEventListener("change", () => {
    client?.sendRaw({ topic: TOPICS.commandReplaySpeed, payload: { speed: Number(speed.value) } });
  });
  const upload = document.getElementById("record-upload") as HTMLInputElement;
  upload?.addEventListener("change", async () => {
    const file = upload.files?.[0];
    if (!file) return;
    const resp = await fetch("/replay", { method: "POST", body: await file.text() });
    if (!resp.ok) {
      const err = await resp.json().catch(() => ({ error: resp.statusText }));
      flashBanner("warning", `replay upload refused: ${err.error}`);
    } else {
      flashBanner("info", "replay started");
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("token-screen")) {
  wireStaticUi();
}
