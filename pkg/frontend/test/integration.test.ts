// @vitest-environment node
//
// End-to-end against the real session service: spawn it, drive the worked
// example through the store, and check the timeline renders the exact
// f-measure-row verdicts and thresholds from the live responses.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { SessionStore } from "../src/state";
import { rowModel } from "../src/timeline";

const PORT = 8943;
const BASE = `http://127.0.0.1:${PORT}`;
const TASK_DIR = new URL("../../src/matchflow/fixtures", import.meta.url).pathname;

const havePython =
  spawnSync("python3", ["-c", "import matchflow"], { timeout: 20000 }).status === 0;

describe.skipIf(!havePython)("live service end-to-end", () => {
  let child: ChildProcess;

  beforeAll(async () => {
    child = spawn(
      "python3",
      ["-m", "matchflow.cli", "serve", "--task-dir", TASK_DIR, "--port", String(PORT)],
      { stdio: "ignore" },
    );
    const deadline = Date.now() + 20000;
    for (;;) {
      try {
        const response = await fetch(`${BASE}/tasks`);
        if (response.ok) break;
      } catch {
        // not up yet
      }
      if (Date.now() > deadline) throw new Error("service did not start");
      await new Promise((resolve) => setTimeout(resolve, 150));
    }
  }, 30000);

  afterAll(() => {
    child?.kill();
  });

  it("renders the worked example from live responses", async () => {
    const api = new ApiClient(BASE);
    const store = new SessionStore(api);

    const tasks = await api.listTasks();
    expect(tasks.length).toBeGreaterThan(0);
    await store.loadTask(tasks[0].id);
    await store.startSession("f", "dynamic", "unbiased");
    expect(store.getState().error).toBeNull();

    const sequence: [number, number, number][] = [
      [0, 0, 0.9],
      [1, 1, 0.15],
      [0, 1, 0.25],
      [2, 3, 1.0],
      [1, 0, 0.3],
    ];
    for (const [row, col, confidence] of sequence) {
      store.select("a", row);
      store.select("b", col);
      store.setConfidence(confidence);
      await store.submit();
      expect(store.getState().error).toBeNull();
    }

    const task = store.getState().task!;
    const rows = store
      .getState()
      .verdicts.map((v) => rowModel(v, task.attributes_a, task.attributes_b));
    expect(rows.map((r) => r.mark)).toEqual([
      "accept",
      "reject",
      "accept",
      "accept",
      "reject",
    ]);
    expect(rows.map((r) => r.threshold)).toEqual(["0.00", "0.18", "0.18", "0.19", "0.31"]);

    await store.finalize({ variant: "uniform", param: 1.0 });
    const final = store.getState().final!;
    expect(final.match).toEqual([
      [0, 0],
      [0, 1],
      [2, 3],
    ]);
    expect(final.report?.final.fmeasure).toBeCloseTo(6 / 7, 9);
  }, 30000);
});
