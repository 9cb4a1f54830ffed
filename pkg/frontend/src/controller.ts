/**
 * The interactive loop as pure state: draw -> search -> weigh clusters ->
 * request a suggestion -> accept (or edit, or discard) -> search again.
 * Rendering hooks are injected so this runs headless in tests.
 */

import { SearchClient, SearchResponse, PerturbResponse } from "./api.js";
import { ClusterPanelState } from "./panel.js";
import { MorphPlayer } from "./morph.js";
import { CanvasStrokeBuffer, Stroke, WirePoint, payloadToStrokes, strokesToPayload } from "./strokes.js";

export interface ControllerHooks {
  onResults?: (resp: SearchResponse) => void;
  onSuggestion?: (resp: PerturbResponse) => void;
  onError?: (message: string, retryable: boolean) => void;
}

export class SessionController {
  buffer = new CanvasStrokeBuffer();
  panel = new ClusterPanelState();
  lastResponse: SearchResponse | null = null;
  suggestion: PerturbResponse | null = null;
  private undoStack: Stroke[][] = [];
  // an accepted suggestion is searched verbatim; re-serializing it from the
  // canvas would re-anchor the first offset. Cleared by any canvas edit.
  private pendingPayload: WirePoint[] | null = null;

  constructor(public client: SearchClient, public morph: MorphPlayer, private hooks: ControllerHooks = {}) {}

  get canSubmit(): boolean {
    return this.buffer.strokeCount > 0 || this.pendingPayload !== null;
  }

  get canSuggest(): boolean {
    return this.panel.hasTargets;
  }

  currentPayload(): WirePoint[] {
    return this.pendingPayload ?? strokesToPayload(this.buffer.strokes());
  }

  // -- canvas edits (all invalidate a pending verbatim payload) ------------

  beginStroke(x: number, y: number, t: number): void {
    this.pendingPayload = null;
    this.buffer.beginStroke(x, y, t);
  }

  extendStroke(x: number, y: number, t: number): void {
    this.buffer.extendStroke(x, y, t);
  }

  endStroke(): void {
    this.buffer.endStroke();
  }

  removeStroke(index: number): void {
    this.pendingPayload = null;
    this.buffer.removeStroke(index);
  }

  clearCanvas(): void {
    this.pendingPayload = null;
    this.buffer.clear();
  }

  /** Convert the canvas (or a pending accepted query), submit, hydrate the panel. */
  async submitSketch(k?: number, m?: number): Promise<SearchResponse | null> {
    if (!this.canSubmit) {
      this.hooks.onError?.("draw at least one stroke first", false);
      return null;
    }
    try {
      const resp = await this.client.search(this.currentPayload(), k, m);
      this.lastResponse = resp;
      this.panel.loadFromResponse(resp.clusters);
      this.suggestion = null;
      this.hooks.onResults?.(resp);
      return resp;
    } catch (err) {
      this.hooks.onError?.(`search failed: ${String(err)}`, true);
      return null;
    }
  }

  /** Ask for a suggestion at the current slider weights and play the morph. */
  async requestSuggestion(method = "backprop"): Promise<PerturbResponse | null> {
    if (!this.canSuggest) {
      this.hooks.onError?.("no clusters to weigh yet", false);
      return null;
    }
    try {
      const resp = await this.client.perturb(this.panel.weights(), method);
      this.suggestion = resp;
      this.hooks.onSuggestion?.(resp);
      this.morph.playImmediate(resp.morph_frames);
      return resp;
    } catch (err) {
      this.hooks.onError?.(`suggestion failed: ${String(err)}`, true);
      return null;
    }
  }

  /** Accept the suggestion server-side; the canvas mirrors it for display. */
  async acceptSuggestion(): Promise<WirePoint[]> {
    const accepted = await this.client.accept();
    this.pushUndo();
    this.buffer.load(payloadToStrokes(accepted));
    this.pendingPayload = accepted;
    this.suggestion = null;
    return accepted;
  }

  /** Load the suggestion strokes into the canvas for manual editing. */
  editSuggestion(): void {
    if (!this.suggestion) return;
    this.pushUndo();
    this.buffer.load(payloadToStrokes(this.suggestion.suggestion_points));
    this.pendingPayload = null;
  }

  /** Submit whatever is on the canvas as a verbatim query replacement. */
  async submitEdited(): Promise<void> {
    await this.client.replaceQuery(this.currentPayload());
  }

  discardSuggestion(): void {
    this.suggestion = null;
  }

  pushUndo(): void {
    this.undoStack.push(this.buffer.snapshot());
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.buffer.load(prev);
    this.pendingPayload = null;
    return true;
  }
}
