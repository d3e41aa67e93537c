/**
 * HTTP client for the painting service. One base-URL setting; everything
 * else mirrors the service API exactly.
 */

import { Scribble, serializeScribbles } from "./schema.js";

export interface Health {
  status: string;
  model_id: string;
  resolution: number;
}

export interface ModelInfo extends Health {
  depth: number;
  base_filters: number;
  parameters: number;
  patch_grid_size: number;
  patch_receptive_field: number;
}

export interface CropBox {
  left: number;
  top: number;
  side: number;
}

export interface PaintResult {
  image: Blob;
  cropBox: CropBox | null;
  modelId: string | null;
}

export class PaintServiceError extends Error {
  constructor(message: string, public readonly status: number) {
    super(message);
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `service returned HTTP ${res.status}`;
}

export class PaintClient {
  constructor(public baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<Health> {
    const res = await fetch(this.url("/health"));
    if (!res.ok) throw new PaintServiceError(await errorMessage(res), res.status);
    return (await res.json()) as Health;
  }

  async model(): Promise<ModelInfo> {
    const res = await fetch(this.url("/model"));
    if (!res.ok) throw new PaintServiceError(await errorMessage(res), res.status);
    return (await res.json()) as ModelInfo;
  }

  async paint(sketch: Blob, scribbles: Scribble[], seed?: number): Promise<PaintResult> {
    const form = new FormData();
    form.append("sketch", sketch, "sketch.png");
    if (scribbles.length > 0) {
      form.append("scribbles", serializeScribbles(scribbles));
    }
    if (seed !== undefined) {
      form.append("seed", String(seed));
    }
    const res = await fetch(this.url("/paint"), { method: "POST", body: form });
    if (!res.ok) throw new PaintServiceError(await errorMessage(res), res.status);
    const cropHeader = res.headers.get("X-Crop-Box");
    return {
      image: await res.blob(),
      cropBox: cropHeader ? (JSON.parse(cropHeader) as CropBox) : null,
      modelId: res.headers.get("X-Model-Id"),
    };
  }
}
