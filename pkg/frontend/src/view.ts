/** DOM rendering for the annotation screen; no framework, full redraw. */

import type { CurvePoint, SessionState } from "./api.js";
import type { AnnotationView } from "./model.js";
import { allConfirmed, wordCount } from "./model.js";

export interface Handlers {
  onQuery(): void;
  onSubmit(): void;
  onRetry(): void;
  onCycleToken(card: number, token: number): void;
  onPickLabel(card: number, token: number, label: string): void;
  onConfirm(card: number, confirmed: boolean): void;
}

export interface Screen {
  session: SessionState | null;
  views: AnnotationView[];
  curve: CurvePoint[];
  busy: boolean;
  banner: string | null;
  invalidIds: Set<number>;
  focus: { card: number; token: number } | null;
}

export function emptyScreen(): Screen {
  return {
    session: null,
    views: [],
    curve: [],
    busy: false,
    banner: null,
    invalidIds: new Set(),
    focus: null,
  };
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderHeader(screen: Screen): HTMLElement {
  const header = el("header", "status-bar");
  const s = screen.session;
  if (!s) {
    header.append(el("h1", "title", "Sequence annotator"));
    return header;
  }
  header.append(el("h1", "title", `Session ${s.id.slice(0, 8)}`));
  const facts = el("dl", "facts");
  const fact = (name: string, value: string, cls: string) => {
    facts.append(el("dt", undefined, name));
    const dd = el("dd", cls, value);
    facts.append(dd);
  };
  fact("strategy", s.strategy, "fact-strategy");
  fact("round", String(s.round), "fact-round");
  fact("budget", `${s.budget.amount} ${s.budget.unit} / round`, "fact-budget");
  fact(
    "labeled",
    `${s.sentences_labeled} sentences, ${s.words_labeled} words`,
    "fact-progress",
  );
  if (s.test_f1 !== null) {
    fact("test F1", s.test_f1.toFixed(4), "fact-f1");
  }
  fact("state", s.truncated ? `${s.state} (pool exhausted)` : s.state, "fact-state");
  header.append(facts);
  return header;
}

function renderBanner(screen: Screen, handlers: Handlers): HTMLElement | null {
  if (!screen.banner) return null;
  const banner = el("div", "banner", screen.banner);
  banner.setAttribute("role", "alert");
  const retry = el("button", "retry", "Retry");
  retry.addEventListener("click", () => handlers.onRetry());
  banner.append(retry);
  return banner;
}

function renderPalette(
  labelSet: readonly string[],
  card: number,
  token: number | null,
  handlers: Handlers,
): HTMLElement {
  const palette = el("div", "palette");
  labelSet.forEach((label, i) => {
    const button = el("button", "palette-label");
    button.append(el("kbd", undefined, String(i)), el("span", undefined, label));
    button.disabled = token === null;
    button.addEventListener("click", () => {
      if (token !== null) handlers.onPickLabel(card, token, label);
    });
    palette.append(button);
  });
  return palette;
}

function renderCard(
  view: AnnotationView,
  cardIndex: number,
  screen: Screen,
  labelSet: readonly string[],
  handlers: Handlers,
): HTMLElement {
  const card = el("section", "card");
  card.dataset.id = String(view.id);
  if (screen.invalidIds.has(view.id)) {
    card.classList.add("invalid");
    card.append(el("p", "invalid-note", "Rejected by the server; fix and resubmit."));
  }

  const head = el("div", "card-head");
  head.append(el("span", "card-id", `#${view.id}`));
  head.append(el("span", "card-words", `${view.tokens.length} words`));
  card.append(head);

  const grid = el("div", "tokens");
  view.tokens.forEach((token, t) => {
    const cell = el("button", "token");
    cell.dataset.card = String(cardIndex);
    cell.dataset.token = String(t);
    const label = view.labels[t] ?? "";
    const edited = view.dirty[t] === true;
    cell.append(el("span", "word", token));
    cell.append(el("span", edited ? "label edited" : "label suggested", label));
    if (
      screen.focus &&
      screen.focus.card === cardIndex &&
      screen.focus.token === t
    ) {
      cell.classList.add("focused");
    }
    cell.addEventListener("click", () => handlers.onCycleToken(cardIndex, t));
    grid.append(cell);
  });
  card.append(grid);

  const focusToken =
    screen.focus && screen.focus.card === cardIndex ? screen.focus.token : null;
  card.append(renderPalette(labelSet, cardIndex, focusToken, handlers));

  const footer = el("label", "confirm");
  const box = el("input") as HTMLInputElement;
  box.type = "checkbox";
  box.checked = view.confirmed;
  box.addEventListener("change", () => handlers.onConfirm(cardIndex, box.checked));
  footer.append(box, el("span", undefined, "Labels confirmed"));
  card.append(footer);
  return card;
}

function renderBatch(screen: Screen, handlers: Handlers): HTMLElement {
  const section = el("section", "batch");
  const labelSet = screen.session?.label_set ?? [];
  section.append(
    el(
      "p",
      "batch-size",
      `${screen.views.length} sentences, ${wordCount(screen.views)} words queried`,
    ),
  );
  screen.views.forEach((view, i) => {
    section.append(renderCard(view, i, screen, labelSet, handlers));
  });
  const submit = el("button", "submit", "Submit annotations");
  submit.disabled = screen.busy || !allConfirmed(screen.views);
  submit.addEventListener("click", () => handlers.onSubmit());
  section.append(submit);
  return section;
}

function renderIdle(screen: Screen, handlers: Handlers): HTMLElement {
  const section = el("section", "idle");
  if (screen.session?.state === "training") {
    section.append(el("p", "training-note", "Training on your annotations..."));
    return section;
  }
  const query = el("button", "query", "Query next batch");
  query.disabled = screen.busy || screen.session?.truncated === true;
  query.addEventListener("click", () => handlers.onQuery());
  section.append(query);
  if (screen.session?.truncated) {
    section.append(
      el("p", "note", "The pool can no longer fill a full budget; session done."),
    );
  }
  return section;
}

function renderCurve(points: CurvePoint[]): HTMLElement {
  const section = el("section", "curve");
  section.append(el("h2", undefined, "Learning curve"));
  if (points.length === 0) {
    section.append(el("p", "note", "No rounds recorded yet."));
    return section;
  }

  const width = 420;
  const height = 160;
  const pad = 28;
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "curve-plot");
  const maxWords = Math.max(...points.map((p) => p.words), 1);
  const x = (w: number) => pad + ((width - 2 * pad) * w) / maxWords;
  const y = (f1: number) => height - pad - (height - 2 * pad) * f1;
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.words).toFixed(1)},${y(p.f1).toFixed(1)}`)
    .join(" ");
  const line = document.createElementNS(svgNs, "path");
  line.setAttribute("d", path);
  line.setAttribute("class", "curve-line");
  svg.append(line);
  for (const p of points) {
    const dot = document.createElementNS(svgNs, "circle");
    dot.setAttribute("cx", x(p.words).toFixed(1));
    dot.setAttribute("cy", y(p.f1).toFixed(1));
    dot.setAttribute("r", "3");
    dot.setAttribute("class", "curve-dot");
    svg.append(dot);
  }
  section.append(svg);

  const table = el("table", "curve-table");
  const head = el("tr");
  for (const name of ["round", "words", "sentences", "precision", "recall", "F1"]) {
    head.append(el("th", undefined, name));
  }
  table.append(head);
  for (const p of points) {
    const row = el("tr");
    row.append(el("td", undefined, String(p.round)));
    row.append(el("td", undefined, String(p.words)));
    row.append(el("td", undefined, String(p.sentences)));
    row.append(el("td", undefined, p.precision.toFixed(4)));
    row.append(el("td", undefined, p.recall.toFixed(4)));
    row.append(el("td", undefined, p.f1.toFixed(4)));
    table.append(row);
  }
  section.append(table);
  return section;
}

export function renderApp(
  root: HTMLElement,
  screen: Screen,
  handlers: Handlers,
): void {
  root.textContent = "";
  root.append(renderHeader(screen));
  const banner = renderBanner(screen, handlers);
  if (banner) root.append(banner);
  if (screen.session) {
    if (screen.views.length > 0) {
      root.append(renderBatch(screen, handlers));
    } else {
      root.append(renderIdle(screen, handlers));
    }
    root.append(renderCurve(screen.curve));
  }
}

/** Digit keys pick labels (label-set order) for the focused token. */
export function handleDigitKey(
  key: string,
  screen: Screen,
  handlers: Handlers,
): boolean {
  if (!screen.focus || !screen.session) return false;
  if (!/^[0-9]$/.test(key)) return false;
  const label = screen.session.label_set[Number(key)];
  if (label === undefined) return false;
  handlers.onPickLabel(screen.focus.card, screen.focus.token, label);
  return true;
}
