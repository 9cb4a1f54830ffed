/**
 * Session flow against a mock server that enforces the API contract and
 * echoes session state, so accept-then-search is verified end to end.
 */

import { describe, expect, it } from "vitest";

import { FetchLike, SearchClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { MorphPlayer } from "../src/morph.js";
import { WirePoint } from "../src/strokes.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), { status, headers: { "content-type": "application/json" } });
}

/** Minimal stateful double of the search service. */
class MockServer {
  sessions = new Map<string, { query: WirePoint[] | null; suggestion: WirePoint[] | null; iteration: number }>();
  searchLog: WirePoint[][] = [];
  private counter = 0;

  private morphFor(suggestion: WirePoint[]): WirePoint[][] {
    // mirrors the live server: the last frame is the suggestion itself
    const frames: WirePoint[][] = [];
    for (let i = 0; i < 10; i++) {
      const f = (i - 9) * 0.01;
      frames.push(suggestion.map(([dx, dy, l]) => [dx + f, dy, l] as WirePoint));
    }
    return frames;
  }

  fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://mock");
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    const parts = url.pathname.split("/").filter(Boolean);

    if (url.pathname === "/api/session") {
      const sid = `s${this.counter++}`;
      this.sessions.set(sid, { query: null, suggestion: null, iteration: 0 });
      return jsonResponse(200, { session_id: sid });
    }
    const sid = parts[2];
    const state = this.sessions.get(sid);
    if (!state) return jsonResponse(404, { detail: "unknown session" });

    if (parts[3] === "search") {
      const points = body.points as WirePoint[];
      if (!points.length || points[points.length - 1][2] !== 1) {
        return jsonResponse(400, { detail: "invalid sketch" });
      }
      state.query = points;
      state.iteration += 1;
      this.searchLog.push(points);
      return jsonResponse(200, {
        session_id: sid,
        iteration: state.iteration,
        results: [
          { id: 1, distance: 0.1, thumb_url: "/api/thumb/1.png" },
          { id: 2, distance: 0.2, thumb_url: "/api/thumb/2.png" },
        ],
        clusters: [
          { member_ids: [1], representative_id: 1, target_points: [[0, 0, 1]], thumb_urls: ["/api/thumb/1.png"] },
          { member_ids: [2], representative_id: 2, target_points: [[1, 1, 1]], thumb_urls: ["/api/thumb/2.png"] },
        ],
      });
    }
    if (parts[3] === "perturb") {
      if (state.query === null) return jsonResponse(409, { detail: "no prior search" });
      if ((body.weights as number[]).length !== 2) return jsonResponse(400, { detail: "weight count" });
      const suggestion = state.query.map(([dx, dy, l]) => [dx + 0.5, dy - 0.25, l] as WirePoint);
      state.suggestion = suggestion;
      state.iteration += 1;
      return jsonResponse(200, {
        method: body.method,
        suggestion_points: suggestion,
        morph_frames: this.morphFor(suggestion),
        loss_trace: [1.0, 0.5],
        distances_before: [0.9, 0.8],
        distances_after: [0.4, 0.8],
        iteration: state.iteration,
      });
    }
    if (parts[3] === "accept") {
      if (state.suggestion === null) return jsonResponse(409, { detail: "no suggestion" });
      state.query = state.suggestion;
      return jsonResponse(200, { query_points: state.suggestion });
    }
    if (parts[3] === "query") {
      state.query = body.points;
      return jsonResponse(200, { ok: true });
    }
    return jsonResponse(404, { detail: "unknown route" });
  };
}

function drawnController(server: MockServer) {
  const rendered: WirePoint[][] = [];
  const morph = new MorphPlayer((frame) => rendered.push(frame));
  const errors: string[] = [];
  const controller = new SessionController(new SearchClient("http://mock", server.fetch), morph, {
    onError: (m) => errors.push(m),
  });
  controller.beginStroke(0, 0, 0);
  controller.extendStroke(10, 5, 1);
  controller.extendStroke(20, 0, 2);
  controller.endStroke();
  return { controller, rendered, errors };
}

describe("interactive session flow", () => {
  it("refuses to submit an empty canvas", async () => {
    const server = new MockServer();
    const morph = new MorphPlayer(() => {});
    const errors: string[] = [];
    const controller = new SessionController(new SearchClient("http://mock", server.fetch), morph, {
      onError: (m) => errors.push(m),
    });
    expect(controller.canSubmit).toBe(false);
    expect(await controller.submitSketch()).toBeNull();
    expect(errors).toHaveLength(1);
  });

  it("search populates one slider per returned cluster", async () => {
    const server = new MockServer();
    const { controller } = drawnController(server);
    const resp = await controller.submitSketch();
    expect(resp?.iteration).toBe(1);
    expect(controller.panel.clusters).toHaveLength(2);
    expect(controller.panel.weights()).toEqual([0, 0]);
    controller.panel.setWeight(0, 0.7);
    controller.panel.setWeight(1, 2.0); // clamped
    expect(controller.panel.weights()).toEqual([0.7, 1.0]);
  });

  it("morph renders exactly the ten server frames", async () => {
    const server = new MockServer();
    const { controller, rendered } = drawnController(server);
    await controller.submitSketch();
    controller.panel.setWeight(0, 1.0);
    const resp = await controller.requestSuggestion("backprop");
    expect(resp?.morph_frames).toHaveLength(10);
    expect(rendered).toHaveLength(10);
    expect(rendered).toEqual(resp?.morph_frames);
    expect(rendered[9]).toEqual(resp?.suggestion_points);
  });

  it("accept-then-search round-trips through the server session echo", async () => {
    const server = new MockServer();
    const { controller } = drawnController(server);
    await controller.submitSketch();
    controller.panel.setWeight(0, 1.0);
    const suggestion = await controller.requestSuggestion("backprop");
    const accepted = await controller.acceptSuggestion();
    expect(accepted).toEqual(suggestion?.suggestion_points);
    // the canvas now holds the accepted suggestion; searching submits it verbatim
    await controller.submitSketch();
    const state = server.sessions.get(controller.client.session!)!;
    expect(server.searchLog[server.searchLog.length - 1]).toEqual(accepted);
    expect(state.query).toEqual(accepted);
  });

  it("edit loads the suggestion for modification and replace-query submits it", async () => {
    const server = new MockServer();
    const { controller } = drawnController(server);
    await controller.submitSketch();
    await controller.requestSuggestion("linear");
    controller.editSuggestion();
    controller.removeStroke(0);
    controller.beginStroke(5, 5, 9);
    controller.extendStroke(8, 8, 10);
    controller.endStroke();
    await controller.submitEdited();
    const state = server.sessions.get(controller.client.session!)!;
    expect(state.query).toEqual(controller.currentPayload());
  });

  it("undo restores the prior canvas after accepting", async () => {
    const server = new MockServer();
    const { controller } = drawnController(server);
    const before = controller.currentPayload();
    await controller.submitSketch();
    await controller.requestSuggestion("linear");
    await controller.acceptSuggestion();
    expect(controller.currentPayload()).not.toEqual(before);
    expect(controller.undo()).toBe(true);
    expect(controller.currentPayload()).toEqual(before);
  });

  it("suggestion before any search surfaces a retryable error", async () => {
    const server = new MockServer();
    const { controller, errors } = drawnController(server);
    // panel empty -> local refusal, no request
    expect(await controller.requestSuggestion()).toBeNull();
    expect(errors[0]).toContain("no clusters");
  });
});
