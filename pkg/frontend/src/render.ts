import { projectPoints } from "./map.js";
import type {
  Alert,
  LamppostRow,
  QueueRow,
  RiskDoc,
  StreamStatus,
  Warning,
} from "./types.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Simulation clock as m:ss.mmm; sim time is relative, not wall time. */
export function fmtSimTime(ms: number): string {
  const minutes = Math.floor(ms / 60000);
  const seconds = Math.floor((ms % 60000) / 1000);
  const millis = ms % 1000;
  return `${minutes}:${String(seconds).padStart(2, "0")}.${String(millis).padStart(3, "0")}`;
}

export function anomalyLabel(anomaly: string): string {
  return anomaly.replace(/_/g, " ");
}

const STATE_LABELS: Record<string, string> = {
  active: "active",
  confirmed: "confirmed",
  dismissed_false_positive: "dismissed",
  deactivated: "deactivated",
};

export function stateBadgeHtml(state: string): string {
  return `<span class="badge state-${esc(state)}">${esc(STATE_LABELS[state] ?? state)}</span>`;
}

/**
 * Triage queue table. Rows are emitted in the exact order given, which is
 * the server's order: the client never re-sorts.
 */
export function queueTableHtml(rows: QueueRow[], selectedId: string | null): string {
  if (rows.length === 0) {
    return `<div class="empty" data-role="queue-empty">No active alerts.</div>`;
  }
  const body = rows
    .map((row) => {
      const selected = row.alert_id === selectedId ? " selected" : "";
      return (
        `<tr class="queue-row${selected}" data-alert-id="${esc(row.alert_id)}">` +
        `<td><span class="badge varphi">${row.varphi}</span></td>` +
        `<td>${esc(anomalyLabel(row.anomaly))}</td>` +
        `<td>${esc(row.lamppost_id)}</td>` +
        `<td class="time">${fmtSimTime(row.created_sim_time_ms)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="queue"><thead><tr>` +
    `<th>crit</th><th>anomaly</th><th>lamppost</th><th>t</th>` +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

/** Detail card for the selected alert; values verbatim from the server. */
export function alertDetailHtml(alert: Alert | null): string {
  if (alert === null) {
    return `<div class="empty">Select an alert to act on it.</div>`;
  }
  const report = alert.source_report;
  const clip = report.metadata.clip_ref;
  const propagated =
    alert.propagated_to.length > 0
      ? alert.propagated_to.map(esc).join(", ")
      : "none";
  return (
    `<dl class="detail" data-alert-id="${esc(alert.alert_id)}">` +
    `<dt>alert</dt><dd class="mono">${esc(alert.alert_id)}</dd>` +
    `<dt>state</dt><dd data-role="alert-state">${stateBadgeHtml(alert.state)}</dd>` +
    `<dt>anomaly</dt><dd>${esc(anomalyLabel(report.anomaly))}</dd>` +
    `<dt>criticality</dt><dd>${alert.varphi} (reported ${report.phi}, risk ${alert.lambda_at_ingest})</dd>` +
    `<dt>source</dt><dd>${esc(report.lamppost_id)} at ${fmtSimTime(report.sim_time_ms)}</dd>` +
    `<dt>confidence</dt><dd>${report.confidence.toFixed(2)}</dd>` +
    `<dt>propagated to</dt><dd data-role="propagated">${propagated}</dd>` +
    (clip ? `<dt>clip</dt><dd class="mono">${esc(clip)}</dd>` : "") +
    `</dl>`
  );
}

/** Action buttons plus the radius input for propagate further. */
export function actionPanelHtml(enabled: boolean, message: string | null): string {
  const disabled = enabled ? "" : " disabled";
  return (
    `<div class="actions">` +
    `<button data-action="confirm"${disabled}>confirm</button>` +
    `<button data-action="dismiss_false_positive"${disabled}>dismiss false positive</button>` +
    `<button data-action="deactivate"${disabled}>deactivate</button>` +
    `<span class="propagate">` +
    `<input data-role="radius" type="number" min="1" step="50" placeholder="radius m" />` +
    `<button data-action="propagate_further"${disabled}>propagate further</button>` +
    `</span>` +
    `</div>` +
    (message !== null
      ? `<div class="conflict" data-role="action-message">${esc(message)}</div>`
      : `<div class="conflict hidden" data-role="action-message"></div>`)
  );
}

/** Global risk gauge, contributing signals, and active preventive warnings. */
export function riskPanelHtml(doc: RiskDoc, warnings: Warning[]): string {
  const lambda = doc.risk.lambda;
  const threshold = doc.preventive_threshold;
  const percent = Math.min(100, (lambda / Math.max(threshold, 1)) * 100);
  const signals = doc.risk.contributing
    .map(
      (s) =>
        `<li><b>${esc(s.source_id)}</b> severity ${s.severity.toFixed(2)}` +
        ` weight ${s.weight.toFixed(2)} ${esc(s.description)}</li>`,
    )
    .join("");
  const warningItems = warnings
    .map(
      (w) =>
        `<li data-warning-id="${esc(w.warning_id)}">preventive warning from ` +
        `<b>${esc(w.trigger_source_id)}</b> at risk ${w.lambda_at_issue}, ` +
        `${w.affected_lampposts.length} lampposts</li>`,
    )
    .join("");
  return (
    `<div class="risk">` +
    `<div class="gauge"><span class="lambda" data-role="lambda">${lambda}</span>` +
    `<span class="of"> / threshold ${threshold}</span></div>` +
    `<div class="bar"><div class="fill${lambda >= threshold ? " hot" : ""}" style="width:${percent.toFixed(1)}%"></div></div>` +
    (signals
      ? `<ul class="signals">${signals}</ul>`
      : `<div class="empty">No live external signals.</div>`) +
    (warningItems ? `<ul class="warnings" data-role="warnings">${warningItems}</ul>` : "") +
    `</div>`
  );
}

const MODE_COLORS: Record<string, string> = {
  off: "#4a5568",
  moderate_speed: "#d29922",
  accident: "#f85149",
};

/** Fleet plotted on an abstract canvas; marker color tracks signalling mode. */
export function mapSvgHtml(rows: LamppostRow[], width: number, height: number): string {
  const placed = projectPoints(
    rows.map((r) => r.position),
    width,
    height,
    24,
  );
  const markers = rows
    .map((row, i) => {
      const point = placed[i];
      if (point === undefined) return "";
      const color = MODE_COLORS[row.signalling_mode] ?? MODE_COLORS.off;
      return (
        `<g data-lamppost-id="${esc(row.lamppost_id)}" data-mode="${esc(row.signalling_mode)}">` +
        `<circle cx="${point.x.toFixed(1)}" cy="${point.y.toFixed(1)}" r="7" fill="${color}" />` +
        `<text x="${point.x.toFixed(1)}" y="${(point.y + 18).toFixed(1)}" text-anchor="middle">` +
        `${esc(row.lamppost_id)}</text>` +
        `</g>`
      );
    })
    .join("");
  return (
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="fleet map">` +
    `${markers}</svg>`
  );
}

const STATUS_TEXT: Record<StreamStatus, string> = {
  connecting: "connecting to control service...",
  live: "live",
  down: "disconnected - data may be stale",
};

/** Connection banner; anything but live marks the page stale. */
export function bannerHtml(status: StreamStatus): string {
  const hidden = status === "live" ? " hidden" : "";
  return (
    `<div class="banner ${esc(status)}${hidden}" data-role="banner">` +
    `${esc(STATUS_TEXT[status])}</div>`
  );
}
