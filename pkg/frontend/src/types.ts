/**
 * Wire shapes served by the control service HTTP API.
 *
 * The dashboard is a pure projection of these documents: every number and
 * every ordering on screen comes straight from the server, never recomputed
 * or re-sorted client-side.
 */

export type SignallingMode = "off" | "moderate_speed" | "accident";

export type AlertState =
  | "active"
  | "confirmed"
  | "dismissed_false_positive"
  | "deactivated";

export type OperatorAction =
  | "confirm"
  | "dismiss_false_positive"
  | "propagate_further"
  | "deactivate";

export interface GeoPoint {
  lat: number;
  lon: number;
}

/** One row of GET /queue, already in triage order. */
export interface QueueRow {
  alert_id: string;
  varphi: number;
  created_sim_time_ms: number;
  anomaly: string;
  lamppost_id: string;
}

export interface SourceReport {
  report_id: string;
  lamppost_id: string;
  anomaly: string;
  phi: number;
  position: GeoPoint;
  sim_time_ms: number;
  confidence: number;
  metadata: Record<string, string>;
}

export interface Alert {
  alert_id: string;
  source_report: SourceReport;
  varphi: number;
  lambda_at_ingest: number;
  state: AlertState;
  propagated_to: string[];
  created_sim_time_ms: number;
}

export interface RiskSignal {
  source_id: string;
  severity: number;
  weight: number;
  issued_sim_time_ms: number;
  ttl_ms: number;
  description: string;
}

export interface RiskContext {
  lambda: number;
  contributing: RiskSignal[];
  computed_sim_time_ms: number;
}

export interface RiskDoc {
  risk: RiskContext;
  preventive_threshold: number;
}

export interface Warning {
  warning_id: string;
  trigger_source_id: string;
  lambda_at_issue: number;
  affected_lampposts: string[];
  issued_sim_time_ms: number;
  active: boolean;
}

export interface LamppostRow {
  lamppost_id: string;
  position: GeoPoint;
  signalling_mode: SignallingMode;
  active_profile_version: number;
}

export interface HealthDoc {
  status: string;
  now_ms: number;
}

/** One frame of the /events stream: a type tag plus the changed document. */
export interface StreamEvent {
  type:
    | "alert_created"
    | "alert_updated"
    | "queue_changed"
    | "risk_changed"
    | "warning_issued"
    | "warning_cleared"
    | string;
  alert?: Alert;
  risk?: RiskContext;
  warning?: Warning;
}

export type StreamStatus = "connecting" | "live" | "down";
