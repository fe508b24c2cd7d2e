import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { SessionStore } from "../src/state";
import { fakeService } from "./fake_service";

/** Delay decision submissions until released; everything else passes through. */
function gateDecisions(underlying: typeof fetch) {
  let release: () => void = () => {};
  const gate = new Promise<void>((resolve) => {
    release = resolve;
  });
  const fetchFn: typeof fetch = async (input, init) => {
    if (String(input).includes("/decisions")) await gate;
    return underlying(input, init);
  };
  return { fetchFn, release };
}

describe("SessionStore", () => {
  it("shows no verdict before the server answers (no optimistic UI)", async () => {
    const service = fakeService();
    const { fetchFn, release } = gateDecisions(service.fetch);
    const store = new SessionStore(new ApiClient("", fetchFn));
    await store.loadTask("po-mini");
    await store.startSession("f", "dynamic", "unbiased");
    store.select("a", 0);
    store.select("b", 0);
    store.setConfidence(0.9);

    const submitPromise = store.submit();
    await Promise.resolve(); // give the store a chance to (wrongly) update early
    expect(store.getState().verdicts).toHaveLength(0);
    expect(store.getState().busy).toBe(true);

    release();
    await submitPromise;
    expect(store.getState().verdicts).toHaveLength(1);
    expect(store.getState().busy).toBe(false);
  });

  it("keeps state unchanged and surfaces the error verbatim on failure", async () => {
    const service = fakeService();
    const store = new SessionStore(new ApiClient("", service.fetch));
    await store.loadTask("po-mini");
    await store.startSession("f", "dynamic", "unbiased");

    // The scripted service expects (0, 0) first; submit a different pair.
    store.select("a", 2);
    store.select("b", 2);
    await store.submit();

    const state = store.getState();
    expect(state.verdicts).toHaveLength(0);
    expect(state.error).toContain("expected pair (0, 0)");
  });

  it("retry re-runs the failed interaction", async () => {
    const service = fakeService();
    const store = new SessionStore(new ApiClient("", service.fetch));
    await store.loadTask("po-mini");
    await store.startSession("f", "dynamic", "unbiased");

    store.select("a", 2);
    store.select("b", 2);
    await store.submit();
    expect(store.getState().error).not.toBeNull();

    // Fix the selection and retry through the same path.
    store.select("a", 0);
    store.select("b", 0);
    store.setConfidence(0.9);
    await store.submit();
    expect(store.getState().error).toBeNull();
    expect(store.getState().verdicts).toHaveLength(1);
  });

  it("requires a full pair before submitting", async () => {
    const service = fakeService();
    const store = new SessionStore(new ApiClient("", service.fetch));
    await store.loadTask("po-mini");
    await store.startSession("f", "dynamic", "unbiased");
    store.select("a", 0);
    await store.submit();
    expect(store.getState().error).toContain("select one attribute on each side");
  });

  it("toggles guidance visibility per session", async () => {
    const service = fakeService();
    const store = new SessionStore(new ApiClient("", service.fetch));
    expect(store.getState().showGuidance).toBe(true);
    store.toggleGuidance();
    expect(store.getState().showGuidance).toBe(false);
    store.toggleGuidance();
    expect(store.getState().showGuidance).toBe(true);
  });

  it("clamps confidence into [0, 1]", () => {
    const service = fakeService();
    const store = new SessionStore(new ApiClient("", service.fetch));
    store.setConfidence(1.7);
    expect(store.getState().confidence).toBe(1);
    store.setConfidence(-0.2);
    expect(store.getState().confidence).toBe(0);
  });
});
