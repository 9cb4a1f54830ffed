/**
 * DOM wiring: a drawing canvas, the result grid grouped by intent cluster,
 * relevance sliders, and the suggestion overlay with Accept / Edit / Discard.
 */

import { SearchClient } from "./api.js";
import { SessionController } from "./controller.js";
import { MorphPlayer } from "./morph.js";
import { Stroke, WirePoint, payloadToStrokes } from "./strokes.js";

const CANVAS_SIZE = 400;

function drawStrokes(ctx: CanvasRenderingContext2D, strokes: Stroke[], style: string): void {
  ctx.strokeStyle = style;
  ctx.lineWidth = 2;
  ctx.lineCap = "round";
  for (const stroke of strokes) {
    if (stroke.length === 0) continue;
    ctx.beginPath();
    ctx.moveTo(stroke[0].x, stroke[0].y);
    for (const p of stroke.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }
}

function fitToCanvas(strokes: Stroke[]): Stroke[] {
  const pts = strokes.flat();
  if (pts.length === 0) return strokes;
  const xs = pts.map((p) => p.x);
  const ys = pts.map((p) => p.y);
  const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
  const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
  const extent = Math.max(Math.max(...xs) - Math.min(...xs), Math.max(...ys) - Math.min(...ys), 1e-9);
  const scale = (CANVAS_SIZE * 0.86) / extent;
  return strokes.map((s) =>
    s.map((p) => ({ x: (p.x - cx) * scale + CANVAS_SIZE / 2, y: (p.y - cy) * scale + CANVAS_SIZE / 2, t: p.t })),
  );
}

export function mountApp(root: HTMLElement, baseUrl = ""): SessionController {
  root.innerHTML = `
    <div class="layout">
      <section class="left">
        <canvas id="pad" width="${CANVAS_SIZE}" height="${CANVAS_SIZE}"></canvas>
        <div class="controls">
          <button id="submit" disabled>Search</button>
          <button id="clear">Clear</button>
          <button id="undo">Undo</button>
          <select id="method">
            <option value="backprop" selected>guided</option>
            <option value="linear">linear</option>
            <option value="slerp">spherical</option>
          </select>
          <button id="suggest" disabled>Suggest</button>
          <span id="banner" class="banner" hidden></span>
        </div>
        <div id="suggestion-controls" hidden>
          <button id="accept">Accept</button>
          <button id="edit">Edit</button>
          <button id="discard">Discard</button>
        </div>
      </section>
      <section class="right">
        <div id="clusters"></div>
        <div id="grid"></div>
      </section>
    </div>`;

  const canvas = root.querySelector<HTMLCanvasElement>("#pad")!;
  const ctx = canvas.getContext("2d")!;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const submitBtn = root.querySelector<HTMLButtonElement>("#submit")!;
  const suggestBtn = root.querySelector<HTMLButtonElement>("#suggest")!;
  const suggestionControls = root.querySelector<HTMLElement>("#suggestion-controls")!;
  const clustersBox = root.querySelector<HTMLElement>("#clusters")!;
  const grid = root.querySelector<HTMLElement>("#grid")!;

  const renderFrame = (frame: WirePoint[]) => {
    ctx.clearRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
    drawStrokes(ctx, fitToCanvas(payloadToStrokes(frame)), "#888");
  };
  const morph = new MorphPlayer(renderFrame);

  const controller = new SessionController(new SearchClient(baseUrl), morph, {
    onError: (message, retryable) => {
      banner.textContent = retryable ? `${message} — check the server and retry` : message;
      banner.hidden = false;
    },
    onResults: (resp) => {
      banner.hidden = true;
      grid.innerHTML = "";
      clustersBox.innerHTML = "";
      resp.clusters.forEach((cluster, ci) => {
        const box = document.createElement("div");
        box.className = "cluster";
        const label = document.createElement("label");
        label.textContent = `intent ${ci + 1}`;
        const slider = document.createElement("input");
        slider.type = "range";
        slider.min = "0";
        slider.max = "100";
        slider.value = "0";
        slider.addEventListener("input", () => {
          controller.panel.setWeight(ci, Number(slider.value) / 100);
        });
        box.append(label, slider);
        const row = document.createElement("div");
        row.className = "thumbs";
        cluster.thumb_urls.forEach((url, i) => {
          const img = document.createElement("img");
          img.src = baseUrl + url;
          if (cluster.member_ids[i] === cluster.representative_id) img.className = "representative";
          row.append(img);
        });
        box.append(row);
        clustersBox.append(box);
      });
      resp.results.forEach((item) => {
        const img = document.createElement("img");
        img.src = baseUrl + item.thumb_url;
        img.title = `#${item.id} d=${item.distance.toFixed(3)}`;
        grid.append(img);
      });
      suggestBtn.disabled = !controller.canSuggest;
    },
    onSuggestion: () => {
      suggestionControls.hidden = false;
    },
  });

  const redraw = () => {
    ctx.clearRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
    drawStrokes(ctx, controller.buffer.strokes(), "#222");
    submitBtn.disabled = !controller.canSubmit;
  };

  let drawing = false;
  canvas.addEventListener("pointerdown", (e) => {
    drawing = true;
    controller.pushUndo();
    controller.beginStroke(e.offsetX, e.offsetY, performance.now());
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!drawing) return;
    controller.extendStroke(e.offsetX, e.offsetY, performance.now());
    redraw();
  });
  const finish = () => {
    if (!drawing) return;
    drawing = false;
    controller.endStroke();
    redraw();
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointerleave", finish);

  submitBtn.addEventListener("click", () => void controller.submitSketch());
  suggestBtn.addEventListener("click", () => {
    const method = root.querySelector<HTMLSelectElement>("#method")!.value;
    void controller.requestSuggestion(method);
  });
  root.querySelector("#clear")!.addEventListener("click", () => {
    controller.pushUndo();
    controller.clearCanvas();
    redraw();
  });
  root.querySelector("#undo")!.addEventListener("click", () => {
    controller.undo();
    redraw();
  });
  root.querySelector("#accept")!.addEventListener("click", async () => {
    await controller.acceptSuggestion();
    suggestionControls.hidden = true;
    redraw();
    void controller.submitSketch();
  });
  root.querySelector("#edit")!.addEventListener("click", () => {
    controller.editSuggestion();
    suggestionControls.hidden = true;
    redraw();
  });
  root.querySelector("#discard")!.addEventListener("click", () => {
    controller.discardSuggestion();
    suggestionControls.hidden = true;
    redraw();
  });

  return controller;
}
