import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { queueTableHtml } from "../src/render.js";
import { openEventStream } from "../src/sse.js";
import type { QueueRow, StreamEvent, StreamStatus } from "../src/types.js";

/**
 * End-to-end: a real control service process, a real lamppost replay
 * seeding 20 alerts, and the dashboard's own client/render modules on top.
 */

const PYTHON = process.env.PYTHON ?? "python3";

// llu-01 reports from (0, 0). 0.001 deg at the equator is ~111.19 m, so the
// 150 m service radius reaches llu-02 and llu-04 at ingest; llu-03 at
// ~222.39 m needs an operator propagate at 300 m; llu-05 stays out of reach.
const FLEET = [
  { id: "llu-01", lat: 0.0, lon: 0.0 },
  { id: "llu-02", lat: 0.0, lon: 0.001 },
  { id: "llu-03", lat: 0.0, lon: 0.002 },
  { id: "llu-04", lat: 0.001, lon: 0.0 },
  { id: "llu-05", lat: 0.0, lon: 0.01 },
];

// Mixed classes so criticalities 1..5 interleave over time: triage order
// (criticality first) then differs visibly from arrival order.
const SCENE: Array<[number, string]> = [
  [1000, "illegally_parked_vehicle"],
  [2000, "vehicle_collision"],
  [3000, "risky_overtaking"],
  [4000, "traffic_congestion"],
  [5000, "wrong_way_driving"],
  [6000, "red_light_violation"],
  [7000, "vehicle_on_pedestrian_area"],
  [8000, "risky_u_turn"],
  [9000, "vehicle_collision"],
  [10000, "traffic_congestion"],
  [11000, "illegally_parked_vehicle"],
  [12000, "wrong_way_driving"],
  [13000, "risky_overtaking"],
  [14000, "vehicle_collision"],
  [15000, "red_light_violation"],
  [16000, "traffic_congestion"],
  [17000, "vehicle_on_pedestrian_area"],
  [18000, "risky_u_turn"],
  [19000, "illegally_parked_vehicle"],
  [20000, "wrong_way_driving"],
];

interface AuditRecord {
  offset: number;
  kind: string;
  sim_time_ms: number;
  data: Record<string, unknown>;
}

let workDir: string;
let auditPath: string;
let server: ChildProcess;
let serverStderr = "";
let api: ApiClient;
let ingestAddr: string;

function readAuditRecords(): AuditRecord[] {
  return readFileSync(auditPath, "utf-8")
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => JSON.parse(line) as AuditRecord);
}

function actionRecords(): Array<Record<string, unknown>> {
  return readAuditRecords()
    .filter((r) => r.kind === "action" && r.data.event === "operator_action")
    .map((r) => r.data);
}

async function waitFor<T>(
  probe: () => Promise<T | null> | T | null,
  what: string,
  timeoutMs = 10000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const got = await probe();
    if (got !== null) return got;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

function startServer(configPath: string): Promise<{ http: number; ingest: number }> {
  server = spawn(
    PYTHON,
    ["-m", "lampgrid", "tcu", "serve", "--config", configPath,
     "--listen", "127.0.0.1:0", "--audit", auditPath],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr!.on("data", (chunk: Buffer) => {
    serverStderr += chunk.toString();
  });
  return new Promise((resolve, reject) => {
    const ports: Record<string, number> = {};
    let buffered = "";
    const onData = (chunk: Buffer) => {
      buffered += chunk.toString();
      for (const line of buffered.split("\n")) {
        const match = line.match(/^(http|ingest) listening on .*:(\d+)$/);
        if (match !== null) ports[match[1]!] = Number(match[2]!);
      }
      if (ports.http !== undefined && ports.ingest !== undefined) {
        server.stdout!.off("data", onData);
        resolve({ http: ports.http, ingest: ports.ingest });
      }
    };
    server.stdout!.on("data", onData);
    server.once("exit", (code) =>
      reject(new Error(`service exited early (${code}): ${serverStderr}`)),
    );
  });
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "dashboard-e2e-"));
  auditPath = join(workDir, "audit.hal");
  const configPath = join(workDir, "config.json");
  writeFileSync(configPath, JSON.stringify({
    n_max: 5, m_max: 10, alpha: 0.5,
    propagation_radius_m: 150.0, preventive_threshold: 6,
    fleet: FLEET,
  }));
  const eventsPath = join(workDir, "events.ndjson");
  writeFileSync(
    eventsPath,
    SCENE.map(([t_ms, anomaly]) => JSON.stringify({
      t_ms, anomaly, detection_probability: 1.0, confidence: 0.9,
    })).join("\n") + "\n",
  );

  const ports = await startServer(configPath);
  api = new ApiClient(`http://127.0.0.1:${ports.http}/api/v1`);
  ingestAddr = `127.0.0.1:${ports.ingest}`;

  const replay = spawnSync(
    PYTHON,
    ["-m", "lampgrid", "llu", "run", "--id", "llu-01",
     "--connect", ingestAddr, "--events", eventsPath],
    { encoding: "utf-8", timeout: 60000 },
  );
  expect(replay.status, replay.stderr).toBe(0);
  expect(replay.stdout).toContain("llu-01: sent 20 reports");
}, 60000);

afterAll(async () => {
  if (server !== undefined && server.exitCode === null) {
    const exited = new Promise((resolve) => server.once("exit", resolve));
    server.kill("SIGINT");
    await exited;
  }
});

describe("queue order passthrough", () => {
  let rows: QueueRow[];

  beforeAll(async () => {
    rows = await api.queue();
  });

  it("seeds a 20-alert queue", () => {
    expect(rows).toHaveLength(20);
  });

  it("renders rows exactly in the order GET /queue returned them", () => {
    const html = queueTableHtml(rows, null);
    const rendered = [...html.matchAll(/data-alert-id="([^"]+)"/g)].map((m) => m[1]);
    expect(rendered).toEqual(rows.map((row) => row.alert_id));
  });

  it("is served in triage order, which differs from arrival order", () => {
    const ids = rows.map((row) => row.alert_id);
    const byArrival = [...rows]
      .sort((a, b) => a.created_sim_time_ms - b.created_sim_time_ms)
      .map((row) => row.alert_id);
    expect(ids).not.toEqual(byArrival);
    const first = rows[0]!;
    expect(first.varphi).toBe(5);
    expect(first.anomaly).toBe("vehicle_collision");
    expect(first.created_sim_time_ms).toBe(2000);
  });
});

describe("live documents", () => {
  it("serves health, fleet, and a quiet risk picture", async () => {
    expect((await api.health()).status).toBe("up");
    const lampposts = await api.lampposts();
    expect(lampposts.map((row) => row.lamppost_id).sort()).toEqual(
      FLEET.map((f) => f.id),
    );
    const risk = await api.risk();
    expect(risk.risk.lambda).toBe(0);
    expect(risk.preventive_threshold).toBe(6);
    expect(await api.warnings()).toEqual([]);
  });
});

describe("operator action round-trip", () => {
  let events: StreamEvent[];
  let statuses: StreamStatus[];
  let closeStream: () => void;
  let topId: string;
  let dismissId: string;
  let deactivateId: string;

  beforeAll(async () => {
    events = [];
    statuses = [];
    closeStream = openEventStream(`${api.baseUrl}/events`, {
      onEvent: (event) => events.push(event),
      onStatus: (status) => statuses.push(status),
    });
    await waitFor(
      () => (statuses.includes("live") ? true : null),
      "the event stream to come up",
    );
    const rows = await api.queue();
    // Three distinct collision alerts sit at the top of the triage order.
    [topId, dismissId, deactivateId] = rows.slice(0, 3).map((r) => r.alert_id) as [
      string, string, string,
    ];
  });

  afterAll(() => {
    closeStream();
  });

  it("confirm is applied by the server and lands in the audit journal", async () => {
    const result = await api.sendAction(topId, "confirm", "ada");
    expect(result.ok).toBe(true);
    if (result.ok) expect(result.alert.state).toBe("confirmed");

    const record = actionRecords().find((r) => r.alert_id === topId);
    expect(record).toMatchObject({
      event: "operator_action",
      action: "confirm",
      operator: "ada",
      resulting_state: "confirmed",
    });
    // A confirmed alert stays in the triage queue.
    const rows = await api.queue();
    expect(rows.map((r) => r.alert_id)).toContain(topId);
  });

  it("dismiss false positive removes the alert from the queue", async () => {
    const result = await api.sendAction(dismissId, "dismiss_false_positive", "ada");
    expect(result.ok).toBe(true);
    if (result.ok) expect(result.alert.state).toBe("dismissed_false_positive");

    const rows = await api.queue();
    expect(rows.map((r) => r.alert_id)).not.toContain(dismissId);
    expect(actionRecords()).toContainEqual({
      event: "operator_action",
      alert_id: dismissId,
      action: "dismiss_false_positive",
      operator: "ada",
      resulting_state: "dismissed_false_positive",
    });
  });

  it("propagate further reaches lampposts inside the widened radius", async () => {
    const result = await api.sendAction(topId, "propagate_further", "ada", 300);
    expect(result.ok).toBe(true);
    if (!result.ok) return;
    // 150 m at ingest covered llu-02/llu-04; 300 m pulls in llu-03.
    expect([...result.alert.propagated_to].sort()).toEqual(
      ["llu-02", "llu-03", "llu-04"],
    );
    expect(actionRecords()).toContainEqual({
      event: "operator_action",
      alert_id: topId,
      action: "propagate_further",
      operator: "ada",
      resulting_state: "confirmed",
      radius_m: 300,
    });
  });

  it("deactivate retires the alert", async () => {
    const result = await api.sendAction(deactivateId, "deactivate", "ada");
    expect(result.ok).toBe(true);
    if (result.ok) expect(result.alert.state).toBe("deactivated");
    const rows = await api.queue();
    expect(rows.map((r) => r.alert_id)).not.toContain(deactivateId);
    expect(rows).toHaveLength(18);
  });

  it("an illegal action surfaces the server conflict and its current state", async () => {
    const result = await api.sendAction(dismissId, "confirm", "ada");
    expect(result.ok).toBe(false);
    if (result.ok) return;
    expect(result.status).toBe(409);
    expect(result.state).toBe("dismissed_false_positive");
    expect(result.error).toContain("confirm");
    // The conflict is not audited as an action: nothing changed.
    const conflicting = actionRecords().filter(
      (r) => r.alert_id === dismissId && r.action === "confirm",
    );
    expect(conflicting).toEqual([]);
  });

  it("rejects a propagate radius the server will not accept", async () => {
    const result = await api.sendAction(topId, "propagate_further", "ada", -5);
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.status).toBe(400);
  });

  it("reports unknown alerts as 404", async () => {
    const result = await api.sendAction("alert-nope", "confirm", "ada");
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.status).toBe(404);
  });

  it("announced every change on the live event stream", async () => {
    await waitFor(() => {
      const types = new Set(events.map((e) => e.type));
      return types.has("alert_updated") && types.has("queue_changed") ? true : null;
    }, "alert_updated and queue_changed frames");
    const updated = events.filter((e) => e.type === "alert_updated");
    expect(updated.some((e) => e.alert?.alert_id === topId)).toBe(true);
  });

  it("audited exactly the four successful operator actions", () => {
    const records = actionRecords();
    expect(records).toHaveLength(4);
    expect(records.map((r) => r.action)).toEqual([
      "confirm",
      "dismiss_false_positive",
      "propagate_further",
      "deactivate",
    ]);
    expect(new Set(records.map((r) => r.operator))).toEqual(new Set(["ada"]));
  });
});
