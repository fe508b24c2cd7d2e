// Verdict timeline: a pure projection of the server's verdict log. Row
// models are derived only from verdict fields the service returned.

import type { AttributeInfo, Verdict } from "./types";

export interface TimelineRow {
  step: number;
  pairLabel: string;
  confidence: string;
  threshold: string;
  mark: "accept" | "reject";
  matchSize: number;
}

export function formatThreshold(value: number): string {
  return value.toFixed(2);
}

export function rowModel(
  verdict: Verdict,
  attrsA: AttributeInfo[],
  attrsB: AttributeInfo[],
): TimelineRow {
  const nameA = attrsA[verdict.row]?.name ?? `#${verdict.row}`;
  const nameB = attrsB[verdict.col]?.name ?? `#${verdict.col}`;
  return {
    step: verdict.index + 1,
    pairLabel: `${nameA} ↔ ${nameB}`,
    confidence: verdict.confidence_used.toFixed(2),
    threshold: formatThreshold(verdict.threshold),
    mark: verdict.accepted ? "accept" : "reject",
    matchSize: verdict.running_match_size,
  };
}

export function renderTimeline(
  container: HTMLElement,
  verdicts: Verdict[],
  attrsA: AttributeInfo[],
  attrsB: AttributeInfo[],
  showGuidance: boolean,
): void {
  container.textContent = "";
  if (verdicts.length === 0) {
    const empty = document.createElement("div");
    empty.className = "timeline-empty";
    empty.textContent = "no decisions yet";
    container.appendChild(empty);
    return;
  }
  for (const verdict of verdicts) {
    const model = rowModel(verdict, attrsA, attrsB);
    const row = document.createElement("div");
    row.className = "timeline-row";
    row.dataset.index = String(verdict.index);

    const step = document.createElement("span");
    step.className = "timeline-step";
    step.textContent = `${model.step}.`;
    row.appendChild(step);

    const pair = document.createElement("span");
    pair.className = "timeline-pair";
    pair.textContent = `${model.pairLabel} @ ${model.confidence}`;
    row.appendChild(pair);

    if (showGuidance) {
      const threshold = document.createElement("span");
      threshold.className = "timeline-threshold";
      threshold.textContent = `threshold ${model.threshold}`;
      row.appendChild(threshold);

      const mark = document.createElement("span");
      mark.className = `timeline-mark ${model.mark}`;
      mark.textContent = model.mark === "accept" ? "✓" : "✗";
      row.appendChild(mark);
    }
    container.appendChild(row);
  }
}
