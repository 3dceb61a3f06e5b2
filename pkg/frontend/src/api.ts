/**
 * Typed client for the estimation service HTTP API.
 *
 * The workbench never computes timing numbers itself: every displayed value
 * comes from one of these endpoints.
 */

export interface TripleDoc {
  bcet: number;
  acet: string; // decimal string, two places
  wcet: number;
}

export interface BlockEstimate {
  id: number;
  label: string | null;
  start: number;
  size: number;
  cost: TripleDoc;
  counts: { bcet: number; acet: number; wcet: number };
  contribution: TripleDoc;
}

export interface EstimateDoc {
  program: string;
  bcet: number;
  acet: string;
  wcet: number;
  blocks: BlockEstimate[];
  witnesses: Record<"bcet" | "acet" | "wcet", Record<string, number>>;
  period?: number;
  load?: Record<"bcet" | "acet" | "wcet", string>;
}

export interface BlockInfo {
  id: number;
  label: string | null;
  start: number;
  size: number;
  addresses: number[];
}

export interface RegionDoc {
  mark: "typical" | "atypical";
  label?: string;
  range?: [number, number];
  frequency?: number;
}

export interface AnnotationDoc {
  regions: RegionDoc[];
  autoPredicates: string[];
}

export interface ProgramDetail {
  name: string;
  source: string;
  blocks: BlockInfo[];
  annotations: AnnotationDoc;
  estimate: EstimateDoc;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function readJson(response: Response): Promise<any> {
  const text = await response.text();
  let doc: any = {};
  try {
    doc = text ? JSON.parse(text) : {};
  } catch {
    doc = { error: "BadResponse", detail: text.slice(0, 200) };
  }
  if (!response.ok) {
    throw new ApiError(response.status, doc.error ?? "HttpError", doc.detail ?? "");
  }
  return doc;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async listPrograms(): Promise<string[]> {
    const doc = await readJson(await fetch(this.url("/programs")));
    return doc.programs;
  }

  async getProgram(name: string): Promise<ProgramDetail> {
    return readJson(await fetch(this.url(`/programs/${encodeURIComponent(name)}`)));
  }

  async getEstimate(name: string, period?: number, signal?: AbortSignal): Promise<EstimateDoc> {
    const query = period !== undefined ? `?period=${period}` : "";
    return readJson(
      await fetch(this.url(`/programs/${encodeURIComponent(name)}/estimate${query}`), { signal }),
    );
  }

  async putAnnotations(name: string, doc: AnnotationDoc): Promise<EstimateDoc> {
    return readJson(
      await fetch(this.url(`/programs/${encodeURIComponent(name)}/annotations`), {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(doc),
      }),
    );
  }

  async modelSummary(): Promise<any> {
    return readJson(await fetch(this.url("/model/summary")));
  }
}
