import type {
  Alert,
  HealthDoc,
  LamppostRow,
  OperatorAction,
  QueueRow,
  RiskDoc,
  Warning,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

/** Outcome of POSTing an operator action; conflicts carry the server's state. */
export type ActionResult =
  | { ok: true; alert: Alert }
  | { ok: false; status: number; error: string; state?: string };

/**
 * Thin typed client for the control service API.
 *
 * Read methods return server documents verbatim; no field is derived and no
 * list is reordered here.
 */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (response.status !== 200) {
      throw new Error(`GET ${path} failed with ${response.status}`);
    }
    return (await response.json()) as T;
  }

  async queue(): Promise<QueueRow[]> {
    const doc = await this.getJson<{ queue: QueueRow[] }>("/queue");
    return doc.queue;
  }

  async alerts(): Promise<Alert[]> {
    const doc = await this.getJson<{ alerts: Alert[] }>("/alerts");
    return doc.alerts;
  }

  async risk(): Promise<RiskDoc> {
    return this.getJson<RiskDoc>("/risk");
  }

  async warnings(): Promise<Warning[]> {
    const doc = await this.getJson<{ warnings: Warning[] }>("/warnings");
    return doc.warnings;
  }

  async lampposts(): Promise<LamppostRow[]> {
    const doc = await this.getJson<{ lampposts: LamppostRow[] }>("/lampposts");
    return doc.lampposts;
  }

  async health(): Promise<HealthDoc> {
    return this.getJson<HealthDoc>("/health");
  }

  async sendAction(
    alertId: string,
    action: OperatorAction,
    operator: string,
    radiusM?: number,
  ): Promise<ActionResult> {
    const body: Record<string, unknown> = { action, operator };
    if (radiusM !== undefined) {
      body.radius_m = radiusM;
    }
    const response = await this.fetchFn(
      `${this.baseUrl}/alerts/${encodeURIComponent(alertId)}/action`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    const doc = (await response.json()) as Record<string, unknown>;
    if (response.status === 200) {
      return { ok: true, alert: doc.alert as Alert };
    }
    return {
      ok: false,
      status: response.status,
      error: String(doc.error ?? `action failed with ${response.status}`),
      state: typeof doc.state === "string" ? doc.state : undefined,
    };
  }
}
