// Application wiring: task picker, session controls, schema trees,
// confidence entry, verdict timeline, finalize panel.

import { ApiClient } from "./api";
import { SessionStore } from "./state";
import { renderPropertiesBox, renderTree } from "./tree";
import { renderTimeline } from "./timeline";
import type { Estimator, Measure, RBChoice, ThresholdMode } from "./types";

const SERVICE_URL = (window as { MATCHFLOW_SERVICE?: string }).MATCHFLOW_SERVICE ?? "";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function bootstrap(): void {
  const api = new ApiClient(SERVICE_URL);
  const store = new SessionStore(api);

  const taskSelect = byId<HTMLSelectElement>("task-select");
  const measureSelect = byId<HTMLSelectElement>("measure-select");
  const modeSelect = byId<HTMLSelectElement>("mode-select");
  const estimatorSelect = byId<HTMLSelectElement>("estimator-select");
  const startButton = byId<HTMLButtonElement>("start-session");
  const treeA = byId<HTMLDivElement>("tree-a");
  const treeB = byId<HTMLDivElement>("tree-b");
  const propsBox = byId<HTMLDivElement>("properties-box");
  const slider = byId<HTMLInputElement>("confidence-slider");
  const numberInput = byId<HTMLInputElement>("confidence-number");
  const submitButton = byId<HTMLButtonElement>("submit-decision");
  const guidanceToggle = byId<HTMLInputElement>("guidance-toggle");
  const timeline = byId<HTMLDivElement>("timeline");
  const thresholdLabel = byId<HTMLSpanElement>("current-threshold");
  const rbVariant = byId<HTMLSelectElement>("rb-variant");
  const rbParam = byId<HTMLInputElement>("rb-param");
  const finalizeButton = byId<HTMLButtonElement>("finalize-session");
  const finalPanel = byId<HTMLDivElement>("final-panel");
  const errorBanner = byId<HTMLDivElement>("error-banner");
  const errorText = byId<HTMLSpanElement>("error-text");
  const retryButton = byId<HTMLButtonElement>("retry-action");
  const selectionLabel = byId<HTMLSpanElement>("selection-label");

  api
    .listTasks()
    .then((tasks) => {
      taskSelect.textContent = "";
      for (const task of tasks) {
        const option = document.createElement("option");
        option.value = task.id;
        option.textContent = `${task.name} (${task.rows}×${task.cols})`;
        taskSelect.appendChild(option);
      }
      if (tasks.length) void store.loadTask(tasks[0].id);
    })
    .catch((err) => {
      errorText.textContent = err instanceof Error ? err.message : String(err);
      errorBanner.hidden = false;
    });

  taskSelect.addEventListener("change", () => void store.loadTask(taskSelect.value));
  startButton.addEventListener("click", () =>
    void store.startSession(
      measureSelect.value as Measure,
      modeSelect.value as ThresholdMode,
      estimatorSelect.value as Estimator,
    ),
  );
  slider.addEventListener("input", () => {
    numberInput.value = slider.value;
    store.setConfidence(Number(slider.value));
  });
  numberInput.addEventListener("input", () => {
    slider.value = numberInput.value;
    store.setConfidence(Number(numberInput.value));
  });
  submitButton.addEventListener("click", () => void store.submit());
  guidanceToggle.addEventListener("change", () => store.toggleGuidance());
  finalizeButton.addEventListener("click", () => {
    const rb: RBChoice = {
      variant: rbVariant.value as RBChoice["variant"],
      param: Number(rbParam.value),
    };
    void store.finalize(rb);
  });
  retryButton.addEventListener("click", () => void store.retry());

  let renderedTaskId: string | null = null;
  store.subscribe((state) => {
    if (state.task && state.task.id !== renderedTaskId) {
      renderedTaskId = state.task.id;
      renderTree(treeA, state.task.schema_a, (id) => store.select("a", id));
      renderTree(treeB, state.task.schema_b, (id) => store.select("b", id));
    }

    const task = state.task;
    if (task) {
      const attrA = state.selection.sideA !== null ? task.attributes_a[state.selection.sideA] : null;
      const attrB = state.selection.sideB !== null ? task.attributes_b[state.selection.sideB] : null;
      const lastPicked = state.selection.lastPicked === "a" ? attrA : attrB;
      renderPropertiesBox(propsBox, lastPicked ?? attrA ?? attrB);
      selectionLabel.textContent =
        attrA && attrB
          ? `${attrA.name} ↔ ${attrB.name}`
          : "pick one attribute on each side";
      renderTimeline(timeline, state.verdicts, task.attributes_a, task.attributes_b, state.showGuidance);
    }

    thresholdLabel.textContent =
      state.showGuidance && state.currentThreshold !== null
        ? state.currentThreshold.toFixed(2)
        : "hidden";
    submitButton.disabled =
      state.busy ||
      state.status !== "open" ||
      state.selection.sideA === null ||
      state.selection.sideB === null;
    startButton.disabled = state.busy || !state.task;
    finalizeButton.disabled = state.busy || state.status !== "open";

    errorBanner.hidden = state.error === null;
    errorText.textContent = state.error ?? "";

    finalPanel.textContent = "";
    if (state.final) {
      const heading = document.createElement("strong");
      heading.textContent = `final match (${state.final.match.length} correspondences)`;
      finalPanel.appendChild(heading);
      if (state.final.warning) {
        const warning = document.createElement("div");
        warning.className = "warning-banner";
        warning.textContent = state.final.warning;
        finalPanel.appendChild(warning);
      }
      const pairs = document.createElement("div");
      pairs.className = "final-pairs";
      pairs.textContent = state.final.match
        .map(([r, c]) => {
          const a = task?.attributes_a[r]?.name ?? `#${r}`;
          const b = task?.attributes_b[c]?.name ?? `#${c}`;
          return `${a} ↔ ${b}`;
        })
        .join(";  ");
      finalPanel.appendChild(pairs);
      if (state.final.report) {
        const quality = document.createElement("div");
        const q = state.final.report.final;
        quality.textContent =
          `quality: P=${q.precision.toFixed(2)} R=${q.recall.toFixed(2)} F=${q.fmeasure.toFixed(2)}`;
        finalPanel.appendChild(quality);
      }
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("task-select")) {
  bootstrap();
}
