import { beforeEach, describe, expect, it, vi } from "vitest";

import type { SessionState } from "../src/api.js";
import { viewsFromBatch } from "../src/model.js";
import type { Handlers, Screen } from "../src/view.js";
import { emptyScreen, handleDigitKey, renderApp } from "../src/view.js";

const LABELS = ["O", "B-A", "I-A"];

function sessionState(overrides: Partial<SessionState> = {}): SessionState {
  return {
    id: "abcd1234",
    state: "awaiting_annotations",
    strategy: "mnlp",
    budget: { unit: "sentences", amount: 3 },
    round: 1,
    words_labeled: 12,
    sentences_labeled: 2,
    label_set: LABELS,
    test_f1: 0.5,
    last_error: null,
    pending_ids: [1, 2, 5],
    truncated: false,
    ...overrides,
  };
}

function threeSentenceScreen(): Screen {
  const screen = emptyScreen();
  screen.session = sessionState();
  screen.views = viewsFromBatch({
    round: 1,
    strategy: "mnlp",
    total_words: 7,
    sequences: [
      { id: 1, tokens: ["a", "b"], suggested: ["O", "B-A"] },
      { id: 2, tokens: ["c", "d", "e"], suggested: ["O", "O", "I-A"] },
      { id: 5, tokens: ["f", "g"], suggested: ["B-A", "I-A"] },
    ],
  });
  return screen;
}

function stubHandlers(): Handlers {
  return {
    onQuery: vi.fn(),
    onSubmit: vi.fn(),
    onRetry: vi.fn(),
    onCycleToken: vi.fn(),
    onPickLabel: vi.fn(),
    onConfirm: vi.fn(),
  };
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("batch rendering", () => {
  it("shows one card per sentence with aligned token/label pairs", () => {
    renderApp(root, threeSentenceScreen(), stubHandlers());
    const cards = root.querySelectorAll(".card");
    expect(cards).toHaveLength(3);
    const second = cards[1]!;
    const words = [...second.querySelectorAll(".word")].map((n) => n.textContent);
    const labels = [...second.querySelectorAll(".label")].map((n) => n.textContent);
    expect(words).toEqual(["c", "d", "e"]);
    expect(labels).toEqual(["O", "O", "I-A"]);
  });

  it("distinguishes model suggestions from human edits", () => {
    const screen = threeSentenceScreen();
    screen.views[0]!.labels[1] = "I-A";
    screen.views[0]!.dirty[1] = true;
    renderApp(root, screen, stubHandlers());
    const labels = root.querySelectorAll(".card")[0]!.querySelectorAll(".label");
    expect(labels[0]!.classList.contains("suggested")).toBe(true);
    expect(labels[1]!.classList.contains("edited")).toBe(true);
  });

  it("clicking a token asks to cycle its label", () => {
    const handlers = stubHandlers();
    renderApp(root, threeSentenceScreen(), handlers);
    const token = root.querySelector(
      '.token[data-card="2"][data-token="1"]',
    ) as HTMLButtonElement;
    token.click();
    expect(handlers.onCycleToken).toHaveBeenCalledWith(2, 1);
  });

  it("disables submit until every card is confirmed", () => {
    const screen = threeSentenceScreen();
    const handlers = stubHandlers();
    renderApp(root, screen, handlers);
    let submit = root.querySelector(".submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);

    screen.views.forEach((v) => (v.confirmed = true));
    renderApp(root, screen, handlers);
    submit = root.querySelector(".submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
    submit.click();
    expect(handlers.onSubmit).toHaveBeenCalled();
  });

  it("shows word count and budget progress", () => {
    renderApp(root, threeSentenceScreen(), stubHandlers());
    expect(root.querySelector(".batch-size")!.textContent).toContain("7 words");
    expect(root.querySelector(".fact-budget")!.textContent).toContain(
      "3 sentences / round",
    );
    expect(root.querySelector(".fact-progress")!.textContent).toContain(
      "12 words",
    );
  });

  it("highlights server-rejected sequences inline", () => {
    const screen = threeSentenceScreen();
    screen.invalidIds = new Set([2]);
    renderApp(root, screen, stubHandlers());
    const bad = root.querySelector('.card[data-id="2"]')!;
    expect(bad.classList.contains("invalid")).toBe(true);
    expect(root.querySelectorAll(".card.invalid")).toHaveLength(1);
  });
});

describe("error banner", () => {
  it("renders the message with a retry control", () => {
    const screen = threeSentenceScreen();
    screen.banner = "Network failure: fetch failed";
    const handlers = stubHandlers();
    renderApp(root, screen, handlers);
    const banner = root.querySelector(".banner")!;
    expect(banner.textContent).toContain("Network failure");
    (banner.querySelector(".retry") as HTMLButtonElement).click();
    expect(handlers.onRetry).toHaveBeenCalled();
  });
});

describe("idle screen", () => {
  it("offers the next query when no batch is pending", () => {
    const screen = emptyScreen();
    screen.session = sessionState({ state: "idle", pending_ids: null });
    const handlers = stubHandlers();
    renderApp(root, screen, handlers);
    const query = root.querySelector(".query") as HTMLButtonElement;
    expect(query.disabled).toBe(false);
    query.click();
    expect(handlers.onQuery).toHaveBeenCalled();
  });

  it("disables querying once the pool cannot meet the budget", () => {
    const screen = emptyScreen();
    screen.session = sessionState({
      state: "idle",
      pending_ids: null,
      truncated: true,
    });
    renderApp(root, screen, stubHandlers());
    const query = root.querySelector(".query") as HTMLButtonElement;
    expect(query.disabled).toBe(true);
  });
});

describe("curve section", () => {
  it("tabulates every recorded round and plots F1 against words", () => {
    const screen = emptyScreen();
    screen.session = sessionState({ state: "idle", pending_ids: null });
    screen.curve = [
      { round: 0, words: 40, sentences: 5, precision: 0.2, recall: 0.2, f1: 0.2 },
      { round: 1, words: 64, sentences: 8, precision: 0.6, recall: 0.5, f1: 0.52 },
    ];
    renderApp(root, screen, stubHandlers());
    expect(root.querySelectorAll(".curve-table tr")).toHaveLength(3);
    expect(root.querySelectorAll(".curve-dot")).toHaveLength(2);
    const path = root.querySelector(".curve-line")!.getAttribute("d")!;
    expect(path.startsWith("M")).toBe(true);
  });
});

describe("digit shortcuts", () => {
  it("maps digits to labels in label-set order for the focused token", () => {
    const screen = threeSentenceScreen();
    screen.focus = { card: 1, token: 2 };
    const handlers = stubHandlers();
    expect(handleDigitKey("2", screen, handlers)).toBe(true);
    expect(handlers.onPickLabel).toHaveBeenCalledWith(1, 2, "I-A");
  });

  it("ignores digits beyond the label set and non-digits", () => {
    const screen = threeSentenceScreen();
    screen.focus = { card: 0, token: 0 };
    const handlers = stubHandlers();
    expect(handleDigitKey("9", screen, handlers)).toBe(false);
    expect(handleDigitKey("x", screen, handlers)).toBe(false);
    expect(handlers.onPickLabel).not.toHaveBeenCalled();
  });

  it("does nothing without a focused token", () => {
    const screen = threeSentenceScreen();
    const handlers = stubHandlers();
    expect(handleDigitKey("1", screen, handlers)).toBe(false);
  });
});
