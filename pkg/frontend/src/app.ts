/** Application wiring: session bootstrap, effects, focus and keys. */

import { ApiError, Client, parseCurveCsv } from "./api.js";
import {
  annotationsPayload,
  cycleLabel,
  setLabel,
  viewsFromBatch,
} from "./model.js";
import type { Handlers, Screen } from "./view.js";
import { emptyScreen, handleDigitKey, renderApp } from "./view.js";

const EXAMPLE_CONFIG = {
  dataset: {
    synthetic: {
      n_train: 200, n_val: 40, n_test: 60,
      vocab_size: 80, n_entity_types: 3, min_len: 4, max_len: 10,
    },
    seed: 1,
  },
  strategy: "wbadge",
  budget: { unit: "sentences", amount: 5 },
  initial_fraction: 0.05,
  n_rounds: 8,
  n_repeats: 1,
  base_seed: 0,
  oracle: "human",
  tagger: { epochs: 10 },
};

export class App {
  readonly screen: Screen = emptyScreen();
  sessionId: string | null = null;
  private lastAction: (() => Promise<void>) | null = null;

  constructor(
    readonly client: Client,
    readonly root: HTMLElement,
  ) {}

  readonly handlers: Handlers = {
    onQuery: () => void this.run(() => this.query()),
    onSubmit: () => void this.run(() => this.submit()),
    onRetry: () => {
      const action = this.lastAction;
      if (action) void this.run(action);
    },
    onCycleToken: (card, token) => {
      const view = this.screen.views[card];
      const labels = this.screen.session?.label_set ?? [];
      if (!view || labels.length === 0) return;
      this.screen.focus = { card, token };
      cycleLabel(view, token, labels);
      this.draw();
    },
    onPickLabel: (card, token, label) => {
      const view = this.screen.views[card];
      const labels = this.screen.session?.label_set ?? [];
      if (!view) return;
      setLabel(view, token, label, labels);
      this.draw();
    },
    onConfirm: (card, confirmed) => {
      const view = this.screen.views[card];
      if (!view) return;
      view.confirmed = confirmed;
      this.draw();
    },
  };

  draw(): void {
    renderApp(this.root, this.screen, this.handlers);
    if (!this.screen.session) this.renderCreateForm();
  }

  /** Serialize effects: one in-flight mutation, busy flag while waiting. */
  private async run(action: () => Promise<void>): Promise<void> {
    if (this.screen.busy) return;
    this.screen.busy = true;
    this.screen.banner = null;
    this.lastAction = action;
    this.draw();
    try {
      await action();
      this.lastAction = null;
    } catch (error) {
      this.fail(error);
    } finally {
      this.screen.busy = false;
      this.draw();
    }
  }

  private fail(error: unknown): void {
    if (error instanceof ApiError) {
      const fields = error.fieldErrors;
      const ids = Object.keys(fields)
        .map((k) => Number(k))
        .filter((n) => Number.isInteger(n));
      if (error.status === 422 && ids.length > 0) {
        this.screen.invalidIds = new Set(ids);
        this.screen.banner = `Server rejected ${ids.length} sequence(s); fix the highlighted cards.`;
        return;
      }
      const messages = Object.entries(fields)
        .map(([k, v]) => `${k}: ${String(v)}`)
        .join("; ");
      this.screen.banner = messages || `Request failed (HTTP ${error.status}).`;
      return;
    }
    this.screen.banner = `Network failure: ${String(error)}`;
  }

  async start(): Promise<void> {
    const match = location.hash.match(/^#\/sessions\/([\w-]+)$/);
    if (match && match[1]) {
      await this.run(() => this.restore(match[1] as string));
    } else {
      this.draw();
    }
  }

  async createSession(config: unknown): Promise<void> {
    await this.run(async () => {
      const created = await this.client.createSession(config);
      this.sessionId = created.id;
      location.hash = `#/sessions/${created.id}`;
      await this.refresh();
    });
  }

  /** Rebuild the whole screen from server state alone. */
  private async restore(id: string): Promise<void> {
    this.sessionId = id;
    await this.refresh();
    if (this.screen.session?.state === "awaiting_annotations") {
      const batch = await this.client.getPendingBatch(id);
      this.screen.views = viewsFromBatch(batch);
    }
    if (this.screen.session?.state === "training") {
      await this.pollTraining();
    }
  }

  private async refresh(): Promise<void> {
    if (!this.sessionId) return;
    this.screen.session = await this.client.getState(this.sessionId);
    this.screen.curve = parseCurveCsv(await this.client.curveCsv(this.sessionId));
  }

  private async query(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const batch = await this.client.queryBatch(this.sessionId);
      this.screen.views = viewsFromBatch(batch);
      this.screen.invalidIds = new Set();
      this.screen.focus = null;
    } finally {
      await this.refresh();
    }
  }

  private async submit(): Promise<void> {
    if (!this.sessionId) return;
    const result = await this.client.submitAnnotations(
      this.sessionId,
      annotationsPayload(this.screen.views),
    );
    this.screen.views = [];
    this.screen.invalidIds = new Set();
    this.screen.focus = null;
    if (result.status === 202) {
      await this.pollTraining();
    }
    await this.refresh();
  }

  private async pollTraining(): Promise<void> {
    if (!this.sessionId) return;
    for (;;) {
      const state = await this.client.getState(this.sessionId);
      this.screen.session = state;
      if (state.state !== "training") return;
      this.draw();
      await new Promise((resolve) => setTimeout(resolve, 400));
    }
  }

  private renderCreateForm(): void {
    const section = document.createElement("section");
    section.className = "create";
    const intro = document.createElement("p");
    intro.textContent =
      "No session loaded. Paste a session config and create one, " +
      "or open an existing session via #/sessions/{id}.";
    const editor = document.createElement("textarea");
    editor.className = "config-editor";
    editor.value = JSON.stringify(EXAMPLE_CONFIG, null, 2);
    const create = document.createElement("button");
    create.className = "create-session";
    create.textContent = "Create session";
    create.addEventListener("click", () => {
      try {
        const config = JSON.parse(editor.value);
        void this.createSession(config);
      } catch (error) {
        this.screen.banner = `Config is not valid JSON: ${String(error)}`;
        this.draw();
      }
    });
    section.append(intro, editor, create);
    this.root.append(section);
  }
}

export function mount(root: HTMLElement, base = ""): App {
  const app = new App(new Client(base), root);
  document.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "TEXTAREA") return;
    if (handleDigitKey(event.key, app.screen, app.handlers)) {
      event.preventDefault();
    }
  });
  document.addEventListener("focusin", (event) => {
    const target = event.target as HTMLElement | null;
    if (target?.dataset.card !== undefined && target.dataset.token !== undefined) {
      app.screen.focus = {
        card: Number(target.dataset.card),
        token: Number(target.dataset.token),
      };
    }
  });
  window.addEventListener("hashchange", () => void app.start());
  void app.start();
  return app;
}

declare global {
  interface Window {
    seqalApp?: App;
  }
}

const container = document.getElementById("app");
if (container) {
  window.seqalApp = mount(container);
}
