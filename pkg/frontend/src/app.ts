/**
 * Painting UI: upload or draw a sketch, scribble color hints over it,
 * request a paint from the service, and compare results side by side.
 *
 * The sketch bitmap and the scribble layer are separate canvases; scribbles
 * never touch the sketch pixels. Only one paint request is in flight at a
 * time; the button is disabled while waiting.
 */

import { PaintClient, PaintServiceError } from "./client.js";
import { HistoryStrip } from "./history.js";
import { ScribbleLayer } from "./scribbleLayer.js";

const PALETTE = [
  "#e6194b", "#f58231", "#ffe119", "#bfef45", "#3cb44b", "#42d4f4",
  "#4363d8", "#911eb4", "#f032e6", "#a9a9a9", "#ffffff", "#000000",
];

const MIN_RADIUS = 2;
const MAX_RADIUS = 24;

type Mode = "idle" | "painting";

interface HistoryResult {
  url: string;
  seed: number | undefined;
}

class PaintApp {
  private client: PaintClient;
  private layer = new ScribbleLayer();
  private history = new HistoryStrip<HistoryResult>(20);
  private mode: Mode = "idle";
  private resolution = 512;
  private color: string = PALETTE[0] ?? "#e6194b";
  private radius = 8;
  private drawingSketch = false;
  private scribbling = false;

  private sketchCanvas: HTMLCanvasElement;
  private scribbleCanvas: HTMLCanvasElement;
  private resultImg: HTMLImageElement;
  private paintButton: HTMLButtonElement;
  private statusEl: HTMLElement;
  private historyEl: HTMLElement;

  constructor(private root: Document) {
    this.client = new PaintClient(
      (root.getElementById("base-url") as HTMLInputElement).value,
    );
    this.sketchCanvas = root.getElementById("sketch") as HTMLCanvasElement;
    this.scribbleCanvas = root.getElementById("scribbles") as HTMLCanvasElement;
    this.resultImg = root.getElementById("result") as HTMLImageElement;
    this.paintButton = root.getElementById("paint") as HTMLButtonElement;
    this.statusEl = root.getElementById("status") as HTMLElement;
    this.historyEl = root.getElementById("history") as HTMLElement;
    this.wireControls();
    this.blankSketch();
    void this.connect();
  }

  private async connect(): Promise<void> {
    try {
      const health = await this.client.health();
      this.resolution = health.resolution;
      this.resizeCanvases();
      this.setStatus(`connected: model ${health.model_id} @ ${health.resolution}px`);
    } catch (e) {
      this.setStatus(`service unreachable: ${String(e)}`, true);
    }
  }

  private wireControls(): void {
    const palette = this.root.getElementById("palette") as HTMLElement;
    for (const hex of PALETTE) {
      const sw = this.root.createElement("button");
      sw.className = "swatch";
      sw.style.background = hex;
      sw.title = hex;
      sw.addEventListener("click", () => this.setColor(hex));
      palette.appendChild(sw);
    }
    const picker = this.root.getElementById("color-picker") as HTMLInputElement;
    picker.addEventListener("input", () => this.setColor(picker.value));

    const radius = this.root.getElementById("radius") as HTMLInputElement;
    radius.min = String(MIN_RADIUS);
    radius.max = String(MAX_RADIUS);
    radius.value = String(this.radius);
    radius.addEventListener("input", () => {
      this.radius = Number(radius.value);
    });

    const upload = this.root.getElementById("upload") as HTMLInputElement;
    upload.addEventListener("change", () => {
      const file = upload.files?.[0];
      if (file) void this.loadSketchFile(file);
    });

    (this.root.getElementById("clear-sketch") as HTMLButtonElement).addEventListener(
      "click",
      () => this.blankSketch(),
    );
    (this.root.getElementById("undo") as HTMLButtonElement).addEventListener(
      "click",
      () => {
        this.layer.undo();
        this.renderScribbles();
      },
    );
    (this.root.getElementById("clear-scribbles") as HTMLButtonElement).addEventListener(
      "click",
      () => {
        this.layer.clear();
        this.renderScribbles();
      },
    );
    this.paintButton.addEventListener("click", () => void this.requestPaint());

    const baseUrl = this.root.getElementById("base-url") as HTMLInputElement;
    baseUrl.addEventListener("change", () => {
      this.client = new PaintClient(baseUrl.value);
      void this.connect();
    });

    const sketchMode = this.root.getElementById("draw-mode") as HTMLInputElement;
    this.scribbleCanvas.addEventListener("pointerdown", (ev) => {
      const [x, y] = this.canvasPoint(ev);
      if (sketchMode.checked) {
        this.drawingSketch = true;
        this.sketchStrokeTo(x, y, true);
      } else {
        this.scribbling = true;
        this.layer.beginStroke(x, y, this.color, this.radius);
        this.renderScribbles();
      }
    });
    this.scribbleCanvas.addEventListener("pointermove", (ev) => {
      const [x, y] = this.canvasPoint(ev);
      if (this.drawingSketch) {
        this.sketchStrokeTo(x, y, false);
      } else if (this.scribbling) {
        this.layer.extendStroke(x, y);
        this.renderScribbles();
      }
    });
    const finish = () => {
      this.drawingSketch = false;
      if (this.scribbling) {
        this.layer.endStroke();
        this.scribbling = false;
        this.renderScribbles();
      }
    };
    this.scribbleCanvas.addEventListener("pointerup", finish);
    this.scribbleCanvas.addEventListener("pointerleave", finish);
  }

  private setColor(hex: string): void {
    this.color = hex.toLowerCase();
    this.setStatus(`brush ${this.color}, radius ${this.radius}`);
  }

  private canvasPoint(ev: PointerEvent): [number, number] {
    const rect = this.scribbleCanvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * this.scribbleCanvas.width;
    const y = ((ev.clientY - rect.top) / rect.height) * this.scribbleCanvas.height;
    return [Math.round(x), Math.round(y)];
  }

  private resizeCanvases(): void {
    for (const c of [this.sketchCanvas, this.scribbleCanvas]) {
      c.width = this.resolution;
      c.height = this.resolution;
    }
    this.blankSketch();
  }

  private blankSketch(): void {
    const ctx = this.sketchCanvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, this.sketchCanvas.width, this.sketchCanvas.height);
    this.layer.clear();
    this.renderScribbles();
  }

  private lastSketchPoint: [number, number] | null = null;

  private sketchStrokeTo(x: number, y: number, begin: boolean): void {
    const ctx = this.sketchCanvas.getContext("2d");
    if (!ctx) return;
    ctx.strokeStyle = "#000000";
    ctx.lineWidth = 2;
    ctx.lineCap = "round";
    ctx.beginPath();
    const from = begin || !this.lastSketchPoint ? [x, y] : this.lastSketchPoint;
    ctx.moveTo(from[0] ?? x, from[1] ?? y);
    ctx.lineTo(x, y);
    ctx.stroke();
    this.lastSketchPoint = [x, y];
    if (!begin) return;
  }

  private async loadSketchFile(file: File): Promise<void> {
    try {
      const bitmap = await createImageBitmap(file);
      const ctx = this.sketchCanvas.getContext("2d");
      if (!ctx) return;
      // center-square-crop client side so the canvas matches model space
      const side = Math.min(bitmap.width, bitmap.height);
      const sx = (bitmap.width - side) / 2;
      const sy = (bitmap.height - side) / 2;
      ctx.fillStyle = "#ffffff";
      ctx.fillRect(0, 0, this.resolution, this.resolution);
      ctx.drawImage(bitmap, sx, sy, side, side, 0, 0, this.resolution, this.resolution);
      this.layer.clear();
      this.renderScribbles();
      this.setStatus(`loaded ${file.name} (cropped to centered square)`);
    } catch (e) {
      this.setStatus(`cannot load image: ${String(e)}`, true);
    }
  }

  private renderScribbles(): void {
    const ctx = this.scribbleCanvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.scribbleCanvas.width, this.scribbleCanvas.height);
    this.layer.render(ctx);
  }

  private setStatus(text: string, isError = false): void {
    this.statusEl.textContent = text;
    this.statusEl.className = isError ? "status error" : "status";
  }

  private async requestPaint(): Promise<void> {
    if (this.mode === "painting") return;
    this.mode = "painting";
    this.paintButton.disabled = true;
    this.setStatus("painting...");
    try {
      const seedInput = this.root.getElementById("seed") as HTMLInputElement;
      const seed = seedInput.value === "" ? undefined : Number(seedInput.value);
      const sketchBlob = await new Promise<Blob>((resolve, reject) =>
        this.sketchCanvas.toBlob(
          (b) => (b ? resolve(b) : reject(new Error("canvas export failed"))),
          "image/png",
        ),
      );
      const result = await this.client.paint(sketchBlob, this.layer.scribbles, seed);
      const url = URL.createObjectURL(result.image);
      this.resultImg.src = url;
      this.pushHistory(url, seed);
      this.setStatus("done");
    } catch (e) {
      const msg = e instanceof PaintServiceError ? `${e.status}: ${e.message}` : String(e);
      this.setStatus(`paint failed: ${msg}`, true);
    } finally {
      this.mode = "idle";
      this.paintButton.disabled = false;
    }
  }

  private pushHistory(url: string, seed: number | undefined): void {
    this.history.push(this.layer.toJSON(), seed, { url, seed });
    this.historyEl.innerHTML = "";
    for (const entry of [...this.history.entries()].reverse()) {
      const img = this.root.createElement("img");
      img.src = entry.result.url;
      img.className = "thumb";
      img.title = entry.seed === undefined ? "no seed" : `seed ${entry.seed}`;
      img.addEventListener("click", () => {
        this.resultImg.src = entry.result.url;
        this.layer.clear();
        for (const s of ScribbleLayer.fromJSON(entry.scribblesJson).scribbles) {
          this.layer.beginStroke(s.points[0]?.[0] ?? 0, s.points[0]?.[1] ?? 0, s.color, s.radius);
          for (const [x, y] of s.points.slice(1)) this.layer.extendStroke(x, y);
          this.layer.endStroke();
        }
        this.renderScribbles();
      });
      this.historyEl.appendChild(img);
    }
  }
}

if (typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", () => new PaintApp(document));
}
