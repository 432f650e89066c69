// REST client for the annotation service. All calls go through the
// injectable fetch so tests can drive a live server from node.

export type PeaTypeName =
  | "blurring"
  | "blocking"
  | "ringing"
  | "color_bleeding"
  | "flickering"
  | "floating";

export const PEA_TYPES: PeaTypeName[] = [
  "blurring",
  "blocking",
  "ringing",
  "color_bleeding",
  "flickering",
  "floating",
];

export const TEMPORAL_TYPES: PeaTypeName[] = ["flickering", "floating"];

export interface SequenceMeta {
  name: string;
  width: number;
  height: number;
  frame_count: number;
  frame_rate: number;
  qp?: number | null;
  coding_structure?: string | null;
}

export interface AnnotationWire {
  sequence: string;
  frame: number;
  pea_type: PeaTypeName;
  cx: number;
  cy: number;
  rx: number;
  ry: number;
  subject_id: string;
  temporal: boolean;
}

export interface StoredAnnotation extends AnnotationWire {
  index: number;
  span?: number;
}

export interface FieldError {
  error: string;
  field?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: FieldError,
  ) {
    super(body.error);
  }
}

type FetchFn = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = globalThis.fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async listSequences(): Promise<SequenceMeta[]> {
    const resp = await this.fetchFn(this.url("/api/sequences"));
    if (!resp.ok) throw new ApiError(resp.status, await resp.json());
    return resp.json();
  }

  frameUrl(sequence: string, frame: number): string {
    return this.url(`/api/sequences/${encodeURIComponent(sequence)}/frames/${frame}`);
  }

  async fetchFramePng(sequence: string, frame: number): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(this.frameUrl(sequence, frame));
    if (!resp.ok) throw new ApiError(resp.status, await resp.json());
    return resp.arrayBuffer();
  }

  async postAnnotation(body: AnnotationWire): Promise<StoredAnnotation> {
    const resp = await this.fetchFn(this.url("/api/annotations"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new ApiError(resp.status, await resp.json());
    return resp.json();
  }

  async getAnnotations(sequence?: string): Promise<StoredAnnotation[]> {
    const query = sequence ? `?sequence=${encodeURIComponent(sequence)}` : "";
    const resp = await this.fetchFn(this.url(`/api/annotations${query}`));
    if (!resp.ok) throw new ApiError(resp.status, await resp.json());
    return resp.json();
  }

  async fetchMaskPng(index: number): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(this.url(`/api/annotations/${index}/mask`));
    if (!resp.ok) throw new ApiError(resp.status, await resp.json());
    return resp.arrayBuffer();
  }

  async getProgress(): Promise<{ subjects: Record<string, unknown> }> {
    const resp = await this.fetchFn(this.url("/api/progress"));
    if (!resp.ok) throw new ApiError(resp.status, await resp.json());
    return resp.json();
  }
}
