/** Dashboard state assembled purely from gateway envelopes.
 *
 * The console holds no authoritative state: every displayed value comes
 * from a data or notif envelope, so clearing the model and replaying the
 * retained set reproduces the display exactly. Commands never touch this
 * module.
 */

import { AREA_PREFIX, Envelope, TOPICS } from "./protocol.js";

export interface AreaBlock {
  gen_mw: number;
  load_mw: number;
  export_mw: number;
  sched_export_mw: number;
  freq_dev_hz: number;
  ace_mw: number;
  score: number;
  cost_usd: number;
  blackout: boolean;
  agc_on: boolean;
}

export interface GenRow {
  id: number;
  p_mw: number;
  q_mvar: number;
  online: boolean;
  p_target_mw: number;
  v_set: number;
}

export interface BranchRow {
  id: number;
  p_from_mw: number;
  q_from_mvar: number;
  loading_pct: number;
  closed: boolean;
}

export interface NotificationRow {
  severity: string;
  text: string;
  sim_time: number;
  wall_ts: number;
  outcome?: any;
}

export interface StripSample {
  t: number;
  v: number;
}

export const STRIP_WINDOW_S = 60;
export const NOTIFICATION_LIMIT = 80;

export class DashboardModel {
  areas = new Map<number, AreaBlock>();
  busIds: number[] = [];
  busV: number[] = [];
  busAngle: number[] = [];
  branches = new Map<number, BranchRow>();
  gens = new Map<number, GenRow>();
  violations: { bus: [number, number, string][]; branch: [number, number][] } = {
    bus: [],
    branch: [],
  };
  notifications: NotificationRow[] = [];
  contour: { rows: number; cols: number; bbox: number[]; values: number[][] } | null = null;
  gmdField: { e_north: number; e_east: number; mag_v_per_km: number } | null = null;
  gmdTransformers: { id: number; neutral_a: number; temp_c: number; q_loss_mvar: number }[] = [];
  gmdNeutrals: { id: number; amps: number }[] = [];
  report: any = null;
  simTime = 0;
  blackout = false;
  /** per key-bus strip chart ring, most recent STRIP_WINDOW_S of samples */
  strip = new Map<number, StripSample[]>();
  stripBusIds: number[] = [];

  /** Wipe everything; used before a reconnect resync. */
  clear(): void {
    this.areas.clear();
    this.busIds = [];
    this.busV = [];
    this.busAngle = [];
    this.branches.clear();
    this.gens.clear();
    this.violations = { bus: [], branch: [] };
    this.notifications = [];
    this.contour = null;
    this.gmdField = null;
    this.gmdTransformers = [];
    this.gmdNeutrals = [];
    this.report = null;
    this.simTime = 0;
    this.blackout = false;
    this.strip.clear();
    this.stripBusIds = [];
  }

  /** Apply one envelope; returns true when anything displayed changed. */
  apply(env: Envelope): boolean {
    const { topic, payload } = env;
    if (topic.startsWith(AREA_PREFIX)) {
      const id = Number(topic.slice(AREA_PREFIX.length));
      this.areas.set(id, payload as AreaBlock);
      this.blackout = Boolean(payload.blackout);
      this.simTime = env.sim_ts;
      return true;
    }
    switch (topic) {
      case TOPICS.busAll: {
        this.busIds = payload.ids;
        this.busV = payload.v_pu;
        this.busAngle = payload.angle_rad;
        this.simTime = env.sim_ts;
        return true;
      }
      case TOPICS.busStrip: {
        // the gateway owns the window so a resynced console reproduces
        // the chart exactly; we only mirror it
        this.strip.clear();
        this.stripBusIds = [];
        for (const row of payload.buses ?? []) {
          this.stripBusIds.push(row.id);
          this.strip.set(
            row.id,
            row.t.map((t: number, i: number) => ({ t, v: row.v[i] })),
          );
        }
        return true;
      }
      case TOPICS.branchAll: {
        const ids: number[] = payload.ids;
        ids.forEach((id, i) => {
          this.branches.set(id, {
            id,
            p_from_mw: payload.p_from_mw[i],
            q_from_mvar: payload.q_from_mvar[i],
            loading_pct: payload.loading_pct[i],
            closed: payload.closed[i],
          });
        });
        return true;
      }
      case TOPICS.genAll: {
        const ids: number[] = payload.ids;
        ids.forEach((id, i) => {
          this.gens.set(id, {
            id,
            p_mw: payload.p_mw[i],
            q_mvar: payload.q_mvar[i],
            online: payload.online[i],
            p_target_mw: payload.p_target_mw[i],
            v_set: payload.v_set[i],
          });
        });
        return true;
      }
      case TOPICS.violations:
        this.violations = { bus: payload.bus ?? [], branch: payload.branch ?? [] };
        return true;
      case TOPICS.gmdContour:
        this.contour = {
          rows: payload.rows,
          cols: payload.cols,
          bbox: payload.bbox,
          values: payload.values,
        };
        this.gmdField = payload.field ?? null;
        return true;
      case TOPICS.gmdTransformers:
        this.gmdTransformers = payload.transformers ?? [];
        this.gmdNeutrals = payload.neutrals ?? [];
        return true;
      case TOPICS.report:
        this.report = payload;
        return true;
      case TOPICS.notifCommand:
      case TOPICS.notifAlarm: {
        this.notifications.push({
          severity: payload.severity,
          text: payload.text,
          sim_time: payload.sim_time,
          wall_ts: env.wall_ts,
          outcome: payload.outcome,
        });
        if (payload.report) this.report = payload.report;
        while (this.notifications.length > NOTIFICATION_LIMIT) this.notifications.shift();
        return true;
      }
      default:
        return false;
    }
  }

  /** Stable snapshot of everything a dashboard renders, for display-equality checks. */
  displayState(): any {
    return {
      areas: [...this.areas.entries()].sort((a, b) => a[0] - b[0]),
      busIds: this.busIds,
      busV: this.busV,
      branches: [...this.branches.values()].sort((a, b) => a.id - b.id),
      gens: [...this.gens.values()].sort((a, b) => a.id - b.id),
      violations: this.violations,
      contour: this.contour,
      gmdTransformers: this.gmdTransformers,
      blackout: this.blackout,
      simTime: this.simTime,
      strip: [...this.strip.entries()].sort((a, b) => a[0] - b[0]),
    };
  }
}
