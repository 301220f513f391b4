/** Pure annotation state: one editable card per queried sentence.
 *
 * Labels start as the model's suggestions and only change through
 * explicit selection, so every submitted label is either a suggestion
 * or a deliberate human choice.
 */

import type { PendingBatch } from "./api.js";

export interface AnnotationView {
  readonly id: number;
  readonly tokens: readonly string[];
  readonly suggested: readonly string[];
  labels: string[];
  dirty: boolean[];
  confirmed: boolean;
}

export function viewsFromBatch(batch: PendingBatch): AnnotationView[] {
  return batch.sequences.map((seq) => {
    if (seq.tokens.length !== seq.suggested.length) {
      throw new Error(`sequence ${seq.id}: tokens and suggestions misaligned`);
    }
    return {
      id: seq.id,
      tokens: seq.tokens,
      suggested: seq.suggested,
      labels: [...seq.suggested],
      dirty: seq.tokens.map(() => false),
      confirmed: false,
    };
  });
}

export function setLabel(
  view: AnnotationView,
  tokenIndex: number,
  label: string,
  labelSet: readonly string[],
): void {
  if (tokenIndex < 0 || tokenIndex >= view.tokens.length) {
    throw new Error(`token index ${tokenIndex} out of range`);
  }
  if (!labelSet.includes(label)) {
    throw new Error(`label ${label} not in the session label set`);
  }
  view.labels[tokenIndex] = label;
  view.dirty[tokenIndex] = true;
  view.confirmed = false;
}

/** Advance one token to the next label in label-set order. */
export function cycleLabel(
  view: AnnotationView,
  tokenIndex: number,
  labelSet: readonly string[],
): string {
  const current = view.labels[tokenIndex];
  if (current === undefined) {
    throw new Error(`token index ${tokenIndex} out of range`);
  }
  const at = labelSet.indexOf(current);
  const next = labelSet[(at + 1) % labelSet.length];
  if (next === undefined) {
    throw new Error("empty label set");
  }
  setLabel(view, tokenIndex, next, labelSet);
  return next;
}

export function allConfirmed(views: readonly AnnotationView[]): boolean {
  return views.length > 0 && views.every((v) => v.confirmed);
}

export function annotationsPayload(
  views: readonly AnnotationView[],
): Record<string, string[]> {
  const labels: Record<string, string[]> = {};
  for (const view of views) {
    labels[String(view.id)] = [...view.labels];
  }
  return labels;
}

export function wordCount(views: readonly AnnotationView[]): number {
  return views.reduce((sum, v) => sum + v.tokens.length, 0);
}
