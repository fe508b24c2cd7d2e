// Thin typed client over the session service. Every method maps 1:1 to an
// endpoint; server error details are surfaced verbatim via ApiError.

import type {
  Estimator,
  FinalReport,
  Measure,
  RBChoice,
  SessionSnapshot,
  TaskDetail,
  TaskSummary,
  ThresholdMode,
  Verdict,
} from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") detail = body.detail;
    else if (body?.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    // keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  listTasks(): Promise<TaskSummary[]> {
    return this.get("/tasks");
  }

  getTask(taskId: string): Promise<TaskDetail> {
    return this.get(`/tasks/${encodeURIComponent(taskId)}`);
  }

  createSession(
    taskId: string,
    measure: Measure,
    mode: ThresholdMode,
    estimator: Estimator,
  ): Promise<{ id: string }> {
    return this.post("/sessions", {
      task: taskId,
      target: { measure, mode },
      estimator,
    });
  }

  submitDecision(
    sessionId: string,
    row: number,
    col: number,
    confidence: number,
  ): Promise<Verdict> {
    return this.post(`/sessions/${encodeURIComponent(sessionId)}/decisions`, {
      row,
      col,
      confidence,
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.get(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  finalizeSession(sessionId: string, rb: RBChoice): Promise<FinalReport> {
    return this.post(`/sessions/${encodeURIComponent(sessionId)}/finalize`, {
      rb,
    });
  }
}
