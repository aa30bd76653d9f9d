/** Wire contract with the gateway: envelope shape, topics, command kinds. */

export interface Envelope {
  topic: string;
  seq: number;
  wall_ts: number;
  sim_ts: number;
  retain: boolean;
  payload: any;
}

export const TOPICS = {
  case: "data/case",
  busAll: "data/bus/all",
  busStrip: "data/bus/strip",
  branchAll: "data/branch/all",
  genAll: "data/gen/all",
  violations: "data/violations",
  gmdContour: "data/gmd/contour",
  gmdTransformers: "data/gmd/transformers",
  report: "data/report",
  notifCommand: "notif/command",
  notifAlarm: "notif/alarm",
  commandAction: "command/action",
  commandReportFetch: "command/report/fetch",
  commandSessionStop: "command/session/stop",
  commandReplaySpeed: "command/replay/speed",
} as const;

export const AREA_PREFIX = "data/area/";

export type CommandKind =
  | "SetGenMW"
  | "SetGenVoltageSetpoint"
  | "SetGenMvar"
  | "CommitGen"
  | "DecommitGen"
  | "OpenGenBreaker"
  | "CloseGenBreaker"
  | "OpenBranch"
  | "CloseBranch"
  | "OpenBranchTimed"
  | "SetTransformerTap"
  | "SetTransformerTapAuto"
  | "SwitchShuntOn"
  | "SwitchShuntOff"
  | "SetShuntMvar"
  | "ShedLoadPercent"
  | "RestoreLoadPercent"
  | "OpenLoadBreaker"
  | "CloseLoadBreaker"
  | "SetAreaInterchangeSchedule"
  | "ToggleAreaAGC";

export interface CommandPayload {
  kind: CommandKind;
  target: number;
  value?: number;
  activate_at?: number;
  duration?: number;
}

export interface SubscribeFrame {
  op: "sub" | "unsub";
  filter: string;
}

export function commandFrame(payload: CommandPayload): string {
  return JSON.stringify({ topic: TOPICS.commandAction, payload });
}

export function subscribeFrame(filter: string): string {
  return JSON.stringify({ op: "sub", filter } satisfies SubscribeFrame);
}

export function parseEnvelope(text: string): Envelope | null {
  let doc: any;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || typeof doc.topic !== "string") {
    return null; // error frames and malformed input are not envelopes
  }
  return doc as Envelope;
}

export function formatClock(simStartSeconds: number, simTime: number): string {
  const total = Math.round(simStartSeconds + simTime) % 86400;
  const h = Math.floor(total / 3600);
  const m = Math.floor((total % 3600) / 60);
  const s = total % 60;
  const pad = (x: number) => String(x).padStart(2, "0");
  return `${pad(h)}:${pad(m)}:${pad(s)}`;
}
