// Session view state. The timeline and all quality numbers come exclusively
// from server responses: a decision is shown only after the service has
// returned its verdict (no optimistic updates, no client-side thresholds).

import { ApiClient } from "./api";
import type {
  Estimator,
  FinalReport,
  Measure,
  RBChoice,
  SessionSnapshot,
  TaskDetail,
  ThresholdMode,
  Verdict,
} from "./types";

export interface Selection {
  sideA: number | null;
  sideB: number | null;
  lastPicked: "a" | "b" | null;
}

export interface ViewState {
  task: TaskDetail | null;
  sessionId: string | null;
  status: "idle" | "open" | "finalized";
  verdicts: Verdict[];
  currentThreshold: number | null;
  acceptedPairs: [number, number][];
  selection: Selection;
  confidence: number;
  showGuidance: boolean; // per-session toggle: thresholds + verdict marks
  final: FinalReport | null;
  error: string | null;
  busy: boolean;
}

type Listener = (state: ViewState) => void;

export class SessionStore {
  private state: ViewState = {
    task: null,
    sessionId: null,
    status: "idle",
    verdicts: [],
    currentThreshold: null,
    acceptedPairs: [],
    selection: { sideA: null, sideB: null, lastPicked: null },
    confidence: 0.5,
    showGuidance: true,
    final: null,
    error: null,
    busy: false,
  };
  private listeners: Listener[] = [];
  private lastAction: (() => Promise<void>) | null = null;

  constructor(private readonly api: ApiClient) {}

  getState(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  private async run(action: () => Promise<void>): Promise<void> {
    this.lastAction = action;
    this.set({ busy: true, error: null });
    try {
      await action();
    } catch (err) {
      this.set({ error: err instanceof Error ? err.message : String(err) });
    } finally {
      this.set({ busy: false });
    }
  }

  /** Re-run the last failed server interaction. */
  retry(): Promise<void> {
    return this.lastAction ? this.run(this.lastAction) : Promise.resolve();
  }

  loadTask(taskId: string): Promise<void> {
    return this.run(async () => {
      const task = await this.api.getTask(taskId);
      this.set({
        task,
        sessionId: null,
        status: "idle",
        verdicts: [],
        acceptedPairs: [],
        currentThreshold: null,
        final: null,
        selection: { sideA: null, sideB: null, lastPicked: null },
      });
    });
  }

  startSession(measure: Measure, mode: ThresholdMode, estimator: Estimator): Promise<void> {
    return this.run(async () => {
      const task = this.state.task;
      if (!task) throw new Error("no task loaded");
      const created = await this.api.createSession(task.id, measure, mode, estimator);
      const snapshot = await this.api.getSession(created.id);
      this.applySnapshot(snapshot);
    });
  }

  select(side: "a" | "b", attributeId: number): void {
    const selection = { ...this.state.selection, lastPicked: side };
    if (side === "a") selection.sideA = attributeId;
    else selection.sideB = attributeId;
    this.set({ selection });
  }

  setConfidence(value: number): void {
    this.set({ confidence: Math.min(1, Math.max(0, value)) });
  }

  toggleGuidance(): void {
    this.set({ showGuidance: !this.state.showGuidance });
  }

  /** Submit the selected pair; the verdict enters the timeline only once the
   * server has answered. */
  submit(): Promise<void> {
    return this.run(async () => {
      const { sessionId, selection, confidence } = this.state;
      if (!sessionId) throw new Error("no open session");
      if (selection.sideA === null || selection.sideB === null) {
        throw new Error("select one attribute on each side first");
      }
      await this.api.submitDecision(sessionId, selection.sideA, selection.sideB, confidence);
      // The snapshot is the single source of truth for the timeline.
      this.applySnapshot(await this.api.getSession(sessionId));
    });
  }

  finalize(rb: RBChoice): Promise<void> {
    return this.run(async () => {
      const { sessionId } = this.state;
      if (!sessionId) throw new Error("no open session");
      await this.api.finalizeSession(sessionId, rb);
      this.applySnapshot(await this.api.getSession(sessionId));
    });
  }

  refresh(): Promise<void> {
    return this.run(async () => {
      const { sessionId } = this.state;
      if (!sessionId) return;
      this.applySnapshot(await this.api.getSession(sessionId));
    });
  }

  private applySnapshot(snapshot: SessionSnapshot): void {
    this.set({
      sessionId: snapshot.id,
      status: snapshot.status,
      verdicts: snapshot.verdicts,
      acceptedPairs: snapshot.accepted,
      currentThreshold: snapshot.current_threshold,
      final: snapshot.final,
    });
  }
}
