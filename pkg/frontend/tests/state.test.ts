import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ReviewController } from "../src/state.js";
import { FakeServer, makeProposals } from "./fakeServer.js";

async function setup(count = 10, k = count) {
  const server = new FakeServer(makeProposals(count), k);
  const api = new ApiClient("", server.fetch);
  const ctrl = await ReviewController.load(api);
  return { server, api, ctrl };
}

describe("loading", () => {
  it("pulls session, proposals, and stats from the server", async () => {
    const { ctrl } = await setup(10, 8);
    expect(ctrl.k).toBe(8);
    expect(ctrl.proposals.size).toBe(8);
    expect(ctrl.currentRank).toBe(1);
    expect(ctrl.stats?.reviewed).toBe(0);
  });

  it("resumes at the first unreviewed rank", async () => {
    const server = new FakeServer(makeProposals(6), 6);
    const api = new ApiClient("", server.fetch);
    await api.verdict(1, "fp", []);
    await api.verdict(2, "tp", ["drop"]);
    const ctrl = await ReviewController.load(api);
    expect(ctrl.currentRank).toBe(3);
    expect(ctrl.verdicts.get(2)?.error_types).toEqual(["drop"]);
  });

  it("stays on the last rank when everything is reviewed", async () => {
    const server = new FakeServer(makeProposals(3), 3);
    const api = new ApiClient("", server.fetch);
    for (const rank of [1, 2, 3]) await api.verdict(rank, "fp", []);
    const ctrl = await ReviewController.load(api);
    expect(ctrl.currentRank).toBe(3);
  });
});

describe("navigation", () => {
  it("clamps to [1, k]", async () => {
    const { ctrl } = await setup(5);
    expect(ctrl.goTo(99)).toBe(true);
    expect(ctrl.currentRank).toBe(5); // rank k+1 and beyond land on k
    expect(ctrl.goTo(-2)).toBe(true);
    expect(ctrl.currentRank).toBe(1);
  });

  it("clears the pending tag selection when leaving a proposal", async () => {
    const { ctrl } = await setup(5);
    ctrl.toggleType("flip");
    ctrl.next();
    expect(ctrl.pendingTypes.size).toBe(0);
  });
});

describe("verdict submission", () => {
  it("refuses a confirmation without an error type", async () => {
    const { server, ctrl } = await setup(5);
    const result = await ctrl.submit("tp");
    expect(result).toMatchObject({ ok: false, queued: false });
    expect(server.log).toHaveLength(0);
    expect(ctrl.currentRank).toBe(1);
  });

  it("posts, applies the server ack, and auto-advances", async () => {
    const { server, ctrl } = await setup(5);
    ctrl.toggleType("flip");
    ctrl.toggleType("spawn");
    const result = await ctrl.submit("tp");
    expect(result).toMatchObject({ ok: true, rank: 1 });
    expect(ctrl.currentRank).toBe(2);
    expect(ctrl.pendingTypes.size).toBe(0);
    expect(ctrl.verdicts.get(1)?.verdict).toBe("tp");
    expect(server.log).toHaveLength(1);
    expect(server.log[0].error_types).toEqual(["flip", "spawn"]);
    // displayed stats are exactly the server fold attached to the ack
    expect(ctrl.stats).toEqual(server.stats());
    expect(ctrl.stats?.per_type.flip).toBe(1);
    expect(ctrl.stats?.per_type.spawn).toBe(1);
  });

  it("unsure grows the denominator but not the numerator", async () => {
    const { ctrl } = await setup(5);
    ctrl.toggleType("drop");
    await ctrl.submit("tp");
    expect(ctrl.stats?.precision).toBe(1.0);
    await ctrl.submit("unsure");
    expect(ctrl.stats?.reviewed).toBe(2);
    expect(ctrl.stats?.counts.tp).toBe(1);
    expect(ctrl.stats?.precision).toBe(0.5);
  });

  it("counts the latest verdict after revisiting a rank", async () => {
    const { server, ctrl } = await setup(5);
    await ctrl.submit("fp");
    expect(ctrl.currentRank).toBe(2);
    ctrl.goTo(1);
    ctrl.toggleType("shift");
    await ctrl.submit("tp");
    expect(ctrl.verdicts.get(1)?.verdict).toBe("tp");
    expect(ctrl.stats?.reviewed).toBe(1); // same rank, so no new denominator
    expect(ctrl.stats?.counts.tp).toBe(1);
    expect(ctrl.stats?.counts.fp).toBe(0);
    expect(server.log).toHaveLength(2); // append-only log keeps both writes
  });

  it("blocks navigation until the server acknowledges", async () => {
    const server = new FakeServer(makeProposals(5), 5);
    let release: (() => void) | null = null;
    const gated: typeof server.fetch = async (url, init) => {
      if (init?.method === "POST") {
        await new Promise<void>((resolve) => {
          release = resolve;
        });
      }
      return server.fetch(url, init);
    };
    const ctrl = await ReviewController.load(new ApiClient("", gated));
    const inflight = ctrl.submit("fp");
    expect(ctrl.blocked()).toBe(true);
    expect(ctrl.next()).toBe(false);
    expect(ctrl.goTo(4)).toBe(false);
    expect(ctrl.currentRank).toBe(1);
    release!();
    await inflight;
    expect(ctrl.blocked()).toBe(false);
    expect(ctrl.currentRank).toBe(2);
  });
});

describe("network failure", () => {
  it("retains the verdict locally and blocks advance until retried", async () => {
    const { server, ctrl } = await setup(5);
    server.failNextPosts = 1;
    const result = await ctrl.submit("fp");
    expect(result).toMatchObject({ ok: false, queued: true });
    expect(ctrl.blocked()).toBe(true);
    expect(ctrl.next()).toBe(false);
    expect(ctrl.queuedSubmission()).toMatchObject({ rank: 1, verdict: "fp" });
    expect(ctrl.verdicts.has(1)).toBe(false);
    expect(server.log).toHaveLength(0);

    const retried = await ctrl.retry();
    expect(retried).toMatchObject({ ok: true, rank: 1 });
    expect(server.log).toHaveLength(1);
    expect(ctrl.blocked()).toBe(false);
    expect(ctrl.currentRank).toBe(2);
  });

  it("keeps the queued verdict when the retry fails too", async () => {
    const { server, ctrl } = await setup(5);
    server.failNextPosts = 2;
    ctrl.toggleType("spawn");
    await ctrl.submit("tp");
    const second = await ctrl.retry();
    expect(second).toMatchObject({ ok: false, queued: true });
    expect(ctrl.queuedSubmission()).toMatchObject({
      rank: 1,
      verdict: "tp",
      errorTypes: ["spawn"],
    });
    const third = await ctrl.retry();
    expect(third.ok).toBe(true);
    expect(server.log[0].error_types).toEqual(["spawn"]);
  });

  it("a rejected submission (HTTP 400) is not queued for retry", async () => {
    const server = new FakeServer(makeProposals(5), 5);
    const api = new ApiClient("", server.fetch);
    const ctrl = await ReviewController.load(api);
    // force an out-of-range rank by shrinking k server-side after load
    server.k = 0;
    const result = await ctrl.submit("fp");
    expect(result).toMatchObject({ ok: false, queued: false });
    expect(ctrl.blocked()).toBe(false);
    expect(ctrl.queuedSubmission()).toBeNull();
  });
});

describe("refresh recovery", () => {
  it("a fresh load reproduces verdicts, stats, and resume position", async () => {
    const { server, ctrl } = await setup(8);
    ctrl.toggleType("drop");
    await ctrl.submit("tp");
    await ctrl.submit("fp");
    await ctrl.submit("unsure");

    const reloaded = await ReviewController.load(new ApiClient("", server.fetch));
    expect(reloaded.currentRank).toBe(4);
    expect(reloaded.stats).toEqual(ctrl.stats);
    expect([...reloaded.verdicts.keys()]).toEqual([...ctrl.verdicts.keys()]);
    for (const [rank, rec] of ctrl.verdicts) {
      expect(reloaded.verdicts.get(rank)).toEqual(rec);
    }
  });
});

describe("view state", () => {
  it("clamps zoom and accumulates pan", async () => {
    const { ctrl } = await setup(3);
    for (let i = 0; i < 40; i++) ctrl.zoomBy(1.25);
    expect(ctrl.view.zoom).toBe(8);
    for (let i = 0; i < 80; i++) ctrl.zoomBy(0.8);
    expect(ctrl.view.zoom).toBe(0.25);
    ctrl.panBy(10, -5);
    ctrl.panBy(3, 2);
    expect(ctrl.view.panX).toBe(13);
    expect(ctrl.view.panY).toBe(-3);
    ctrl.resetView();
    expect(ctrl.view).toEqual({ zoom: 1, panX: 0, panY: 0 });
  });

  it("navigation resets zoom and pan", async () => {
    const { ctrl } = await setup(3);
    ctrl.zoomBy(2);
    ctrl.panBy(5, 5);
    ctrl.next();
    expect(ctrl.view).toEqual({ zoom: 1, panX: 0, panY: 0 });
  });

  it("toggles overlay parts independently", async () => {
    const { ctrl } = await setup(3);
    ctrl.toggleOverlay("labels");
    expect(ctrl.overlay).toEqual({ proposal: true, labels: false, names: true });
    ctrl.toggleOverlay("labels");
    ctrl.toggleOverlay("names");
    expect(ctrl.overlay).toEqual({ proposal: true, labels: true, names: false });
  });
});
