import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiError, Client } from "../src/api.js";
import type { PendingBatch, SessionState } from "../src/api.js";
import { App } from "../src/app.js";
import { CURVE_CSV_HEADER } from "../src/api.js";

const LABELS = ["O", "B-A", "I-A"];

function stateDoc(overrides: Partial<SessionState> = {}): SessionState {
  return {
    id: "s1",
    state: "idle",
    strategy: "mnlp",
    budget: { unit: "sentences", amount: 2 },
    round: 0,
    words_labeled: 8,
    sentences_labeled: 2,
    label_set: LABELS,
    test_f1: 0.3,
    last_error: null,
    pending_ids: null,
    truncated: false,
    ...overrides,
  };
}

function batchDoc(): PendingBatch {
  return {
    round: 1,
    strategy: "mnlp",
    total_words: 4,
    sequences: [
      { id: 4, tokens: ["a", "b"], suggested: ["O", "B-A"] },
      { id: 6, tokens: ["c", "d"], suggested: ["I-A", "O"] },
    ],
  };
}

interface FakeClient {
  createSession: ReturnType<typeof vi.fn>;
  getState: ReturnType<typeof vi.fn>;
  queryBatch: ReturnType<typeof vi.fn>;
  getPendingBatch: ReturnType<typeof vi.fn>;
  submitAnnotations: ReturnType<typeof vi.fn>;
  curveCsv: ReturnType<typeof vi.fn>;
}

function fakeClient(): FakeClient {
  return {
    createSession: vi.fn(),
    getState: vi.fn().mockResolvedValue(stateDoc()),
    queryBatch: vi.fn().mockResolvedValue(batchDoc()),
    getPendingBatch: vi.fn().mockResolvedValue(batchDoc()),
    submitAnnotations: vi.fn().mockResolvedValue({ status: 200, body: {} }),
    curveCsv: vi
      .fn()
      .mockResolvedValue(CURVE_CSV_HEADER + "\n0,8,2,0.3,0.3,0.3\n"),
  };
}

function makeApp(client: FakeClient): App {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app")!;
  const app = new App(client as unknown as Client, root);
  app.sessionId = "s1";
  return app;
}

async function settled(): Promise<void> {
  for (let i = 0; i < 20; i += 1) {
    await Promise.resolve();
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

beforeEach(() => {
  location.hash = "";
});

describe("query flow", () => {
  it("renders the queried batch and refreshes state", async () => {
    const client = fakeClient();
    const app = makeApp(client);
    app.handlers.onQuery();
    await settled();
    expect(client.queryBatch).toHaveBeenCalledWith("s1");
    expect(app.screen.views).toHaveLength(2);
    expect(document.querySelectorAll(".card")).toHaveLength(2);
    expect(client.getState).toHaveBeenCalled();
  });

  it("surfaces a pool-exhausted rejection as a banner", async () => {
    const client = fakeClient();
    client.queryBatch.mockRejectedValue(
      new ApiError(410, { detail: { errors: { budget: "pool exhausted" } } }),
    );
    const app = makeApp(client);
    app.handlers.onQuery();
    await settled();
    expect(app.screen.banner).toContain("pool exhausted");
    expect(document.querySelector(".banner")).not.toBeNull();
  });
});

describe("submit flow", () => {
  it("clears the cards and re-renders the updated curve on success", async () => {
    const client = fakeClient();
    const app = makeApp(client);
    app.handlers.onQuery();
    await settled();
    client.curveCsv.mockResolvedValue(
      CURVE_CSV_HEADER + "\n0,8,2,0.3,0.3,0.3\n1,12,4,0.6,0.6,0.6\n",
    );

    app.screen.views.forEach((v) => (v.confirmed = true));
    app.handlers.onSubmit();
    await settled();
    const sent = client.submitAnnotations.mock.calls[0]![1];
    expect(sent).toEqual({ "4": ["O", "B-A"], "6": ["I-A", "O"] });
    expect(app.screen.views).toHaveLength(0);
    expect(app.screen.curve).toHaveLength(2);
    expect(document.querySelectorAll(".curve-table tr")).toHaveLength(3);
  });

  it("keeps the cards and highlights offenders on a validation reject", async () => {
    const client = fakeClient();
    client.submitAnnotations.mockRejectedValue(
      new ApiError(422, { detail: { errors: { "6": "expected 2 labels, got 1" } } }),
    );
    const app = makeApp(client);
    app.handlers.onQuery();
    await settled();
    const before = app.screen.curve.length;

    app.screen.views.forEach((v) => (v.confirmed = true));
    app.handlers.onSubmit();
    await settled();
    expect(app.screen.views).toHaveLength(2);
    expect(app.screen.invalidIds.has(6)).toBe(true);
    expect(app.screen.curve).toHaveLength(before);
    expect(document.querySelector('.card[data-id="6"]')!.classList).toContain(
      "invalid",
    );
  });

  it("polls through an asynchronous training phase", async () => {
    const client = fakeClient();
    client.submitAnnotations.mockResolvedValue({
      status: 202,
      body: { round: 1, state: "training" },
    });
    client.getState
      .mockResolvedValueOnce(stateDoc({ state: "training" }))
      .mockResolvedValue(stateDoc({ round: 1 }));
    const app = makeApp(client);
    app.handlers.onQuery();
    await settled();
    app.screen.views.forEach((v) => (v.confirmed = true));
    app.handlers.onSubmit();
    await settled();
    await settled();
    expect(app.screen.session?.state).toBe("idle");
    expect(app.screen.session?.round).toBe(1);
  });
});

describe("retry", () => {
  it("re-runs the failed action", async () => {
    const client = fakeClient();
    client.queryBatch
      .mockRejectedValueOnce(new TypeError("fetch failed"))
      .mockResolvedValue(batchDoc());
    const app = makeApp(client);
    app.handlers.onQuery();
    await settled();
    expect(app.screen.banner).toContain("fetch failed");

    app.handlers.onRetry();
    await settled();
    expect(app.screen.banner).toBeNull();
    expect(app.screen.views).toHaveLength(2);
  });
});

describe("session restore", () => {
  it("rebuilds an awaiting screen purely from server state", async () => {
    const client = fakeClient();
    client.getState.mockResolvedValue(
      stateDoc({ state: "awaiting_annotations", pending_ids: [4, 6] }),
    );
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const app = new App(client as unknown as Client, root);
    location.hash = "#/sessions/s1";
    await app.start();
    await settled();
    expect(client.getPendingBatch).toHaveBeenCalledWith("s1");
    expect(document.querySelectorAll(".card")).toHaveLength(2);
  });
});
