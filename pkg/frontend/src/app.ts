import type { ActionResult, ApiClient } from "./api.js";
import {
  actionPanelHtml,
  alertDetailHtml,
  bannerHtml,
  fmtSimTime,
  mapSvgHtml,
  queueTableHtml,
  riskPanelHtml,
} from "./render.js";
import { openEventStream, type StreamHandlers } from "./sse.js";
import type {
  Alert,
  LamppostRow,
  OperatorAction,
  QueueRow,
  RiskDoc,
  StreamEvent,
  StreamStatus,
  Warning,
} from "./types.js";

type Resource = "queue" | "alerts" | "risk" | "warnings" | "lampposts" | "health";

const ALL_RESOURCES: Resource[] = [
  "queue",
  "alerts",
  "risk",
  "warnings",
  "lampposts",
  "health",
];

/** Which server documents each stream event can have changed. */
const EVENT_RESOURCES: Record<string, Resource[]> = {
  alert_created: ["queue", "alerts", "lampposts", "health"],
  alert_updated: ["queue", "alerts", "lampposts", "health"],
  queue_changed: ["queue", "health"],
  risk_changed: ["risk", "health"],
  warning_issued: ["warnings", "lampposts", "health"],
  warning_cleared: ["warnings", "lampposts", "health"],
};

export type StreamOpener = (url: string, handlers: StreamHandlers) => () => void;

const SHELL_HTML = `
<header class="topbar">
  <h1>lampgrid</h1>
  <span class="clock" data-role="clock"></span>
  <label class="operator">operator
    <input data-role="operator" type="text" value="operator" />
  </label>
</header>
<div data-mount="banner"></div>
<main class="panels">
  <section class="panel">
    <h2>Alert queue</h2>
    <div data-mount="queue"></div>
    <h2>Selected alert</h2>
    <div data-mount="detail"></div>
    <div data-mount="actions"></div>
  </section>
  <section class="panel">
    <h2>Fleet</h2>
    <div class="map" data-mount="map"></div>
    <h2>Global risk</h2>
    <div data-mount="risk"></div>
  </section>
</main>`;

/**
 * Dashboard controller: one store of server documents, re-rendered on change.
 *
 * State mutates only from fetched documents or a server-confirmed action
 * response; a click never edits an alert locally. Refreshes run through one
 * promise chain so documents apply in event order.
 */
export class Dashboard {
  queue: QueueRow[] = [];
  alerts = new Map<string, Alert>();
  risk: RiskDoc | null = null;
  warnings: Warning[] = [];
  lampposts: LamppostRow[] = [];
  nowMs = 0;
  selectedId: string | null = null;
  actionMessage: string | null = null;
  status: StreamStatus = "connecting";

  private chain: Promise<void> = Promise.resolve();
  private closeStream: (() => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly openStream: StreamOpener = openEventStream,
  ) {}

  start(): void {
    this.root.innerHTML = SHELL_HTML;
    this.wireClicks();
    this.enqueueRefresh(ALL_RESOURCES);
    this.closeStream = this.openStream(`${this.api.baseUrl}/events`, {
      onEvent: (event) => this.onStreamEvent(event),
      onStatus: (status) => this.onStreamStatus(status),
    });
  }

  stop(): void {
    this.closeStream?.();
    this.closeStream = null;
  }

  /** Resolves when every refresh queued so far has been applied. */
  settled(): Promise<void> {
    return this.chain;
  }

  private onStreamEvent(event: StreamEvent): void {
    this.enqueueRefresh(EVENT_RESOURCES[event.type] ?? ALL_RESOURCES);
  }

  private onStreamStatus(status: StreamStatus): void {
    const cameBackUp = this.status !== "live" && status === "live";
    this.status = status;
    this.renderBanner();
    if (cameBackUp) {
      // Events during an outage are gone; resync everything.
      this.enqueueRefresh(ALL_RESOURCES);
    }
  }

  private enqueueRefresh(resources: Resource[]): void {
    this.chain = this.chain.then(async () => {
      try {
        await this.refresh(resources);
      } catch {
        // Unreachable API: the stream status banner already says so.
      }
      this.render();
    });
  }

  private async refresh(resources: Resource[]): Promise<void> {
    for (const resource of resources) {
      if (resource === "queue") this.queue = await this.api.queue();
      else if (resource === "alerts") {
        this.alerts = new Map((await this.api.alerts()).map((a) => [a.alert_id, a]));
      } else if (resource === "risk") this.risk = await this.api.risk();
      else if (resource === "warnings") this.warnings = await this.api.warnings();
      else if (resource === "lampposts") this.lampposts = await this.api.lampposts();
      else this.nowMs = (await this.api.health()).now_ms;
    }
  }

  // -- user actions -----------------------------------------------------------

  private wireClicks(): void {
    this.root.addEventListener("click", (raw) => {
      const target = raw.target as HTMLElement | null;
      if (target === null) return;
      const row = target.closest<HTMLElement>("[data-alert-id]");
      const button = target.closest<HTMLButtonElement>("button[data-action]");
      if (button !== null) {
        void this.runAction(button.dataset.action as OperatorAction);
      } else if (row !== null && row.classList.contains("queue-row")) {
        this.selectedId = row.dataset.alertId ?? null;
        this.actionMessage = null;
        this.render();
      }
    });
  }

  private operatorName(): string {
    const input = this.root.querySelector<HTMLInputElement>('[data-role="operator"]');
    const name = input?.value.trim() ?? "";
    return name === "" ? "operator" : name;
  }

  private radiusValue(): number | null {
    const input = this.root.querySelector<HTMLInputElement>('[data-role="radius"]');
    const radius = Number(input?.value ?? "");
    return Number.isFinite(radius) && radius > 0 ? radius : null;
  }

  async runAction(action: OperatorAction): Promise<void> {
    if (this.selectedId === null) return;
    let radiusM: number | undefined;
    if (action === "propagate_further") {
      const radius = this.radiusValue();
      if (radius === null) {
        // Client-side check: no request leaves the page with a bad radius.
        this.actionMessage = "propagate further needs a radius above 0 m";
        this.render();
        return;
      }
      radiusM = radius;
    }
    const result = await this.api.sendAction(
      this.selectedId,
      action,
      this.operatorName(),
      radiusM,
    );
    this.applyActionResult(result);
    await this.settled();
  }

  private applyActionResult(result: ActionResult): void {
    if (result.ok) {
      this.actionMessage = null;
      // The stream will also announce this; fetching now keeps the UI
      // honest even if the stream is down.
      this.enqueueRefresh(["queue", "alerts", "lampposts", "health"]);
      return;
    }
    this.actionMessage =
      result.state !== undefined
        ? `${result.error} (server state: ${result.state})`
        : result.error;
    this.enqueueRefresh(["queue", "alerts"]);
  }

  // -- rendering ----------------------------------------------------------------

  private mount(name: string): HTMLElement | null {
    return this.root.querySelector<HTMLElement>(`[data-mount="${name}"]`);
  }

  private renderBanner(): void {
    const banner = this.mount("banner");
    if (banner !== null) banner.innerHTML = bannerHtml(this.status);
    this.root
      .querySelector("main")
      ?.classList.toggle("stale", this.status !== "live");
  }

  render(): void {
    if (this.selectedId !== null && !this.alerts.has(this.selectedId)) {
      this.selectedId = null;
    }
    const selected = this.selectedId !== null
      ? this.alerts.get(this.selectedId) ?? null
      : null;
    const mounts = {
      queue: queueTableHtml(this.queue, this.selectedId),
      detail: alertDetailHtml(selected),
      actions: actionPanelHtml(selected !== null, this.actionMessage),
      map: mapSvgHtml(this.lampposts, 480, 360),
      risk: this.risk !== null ? riskPanelHtml(this.risk, this.warnings) : "",
    };
    // A stream-driven re-render must not wipe a radius mid-typing.
    const typedRadius = this.root.querySelector<HTMLInputElement>(
      '[data-role="radius"]',
    )?.value;
    for (const [name, html] of Object.entries(mounts)) {
      const mountPoint = this.mount(name);
      if (mountPoint !== null) mountPoint.innerHTML = html;
    }
    if (typedRadius) {
      const radiusInput = this.root.querySelector<HTMLInputElement>(
        '[data-role="radius"]',
      );
      if (radiusInput !== null) radiusInput.value = typedRadius;
    }
    const clock = this.root.querySelector('[data-role="clock"]');
    if (clock !== null) clock.textContent = `sim ${fmtSimTime(this.nowMs)}`;
    this.renderBanner();
  }
}
