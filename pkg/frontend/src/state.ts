/**
 * Workbench state: block marks, the serialized annotation round-trip and the
 * estimate panel model.
 *
 * Marking is block-granular (selections snap to whole blocks).  Every number
 * shown by the panel is copied verbatim from the latest service response;
 * annotation PUTs are queued so responses apply in request order, and period
 * estimates cancel superseded requests.
 */

import {
  AnnotationDoc,
  ApiClient,
  ApiError,
  BlockInfo,
  EstimateDoc,
  ProgramDetail,
  RegionDoc,
} from "./api.js";

export type Mark = "typical" | "atypical";

export interface BlockMark {
  mark: Mark;
  frequency?: number;
}

export interface SourceLine {
  text: string;
  address: number | null; // instruction address, null for blanks/comments/directives
}

export interface PanelDelta {
  bcet: number;
  acet: number;
  wcet: number;
}

/** Attach instruction addresses to display lines (presentation only). */
export function mapSourceLines(source: string): SourceLine[] {
  const lines = source.split("\n");
  let address = 0;
  return lines.map((text) => {
    const body = text.split(";")[0]!.trim();
    const afterLabel = body.includes(":") ? body.split(":", 2)[1]!.trim() : body;
    const isInstruction = body !== "" && !body.startsWith(".") && afterLabel !== "";
    return { text, address: isInstruction ? address++ : null };
  });
}

/** Blocks whose address span intersects [loAddr, hiAddr] (snap-to-block). */
export function snapToBlocks(blocks: BlockInfo[], loAddr: number, hiAddr: number): number[] {
  return blocks
    .filter((b) => b.start <= hiAddr && loAddr <= b.start + b.size - 1)
    .map((b) => b.id);
}

/** Top contributors by worst-case share; the heat threshold is the top fifth. */
export function heatBlockIds(estimate: EstimateDoc): Set<number> {
  const ranked = [...estimate.blocks]
    .filter((b) => b.contribution.wcet > 0)
    .sort((a, b) => b.contribution.wcet - a.contribution.wcet);
  const keep = Math.max(1, Math.ceil(ranked.length / 5));
  return new Set(ranked.slice(0, keep).map((b) => b.id));
}

export function marksToAnnotations(blocks: BlockInfo[], marks: Map<number, BlockMark>): AnnotationDoc {
  const regions: RegionDoc[] = [];
  for (const block of blocks) {
    const mark = marks.get(block.id);
    if (!mark) continue;
    const region: RegionDoc = { mark: mark.mark };
    if (block.label) {
      region.label = block.label;
    } else {
      region.range = [block.start, block.start + block.size - 1];
    }
    if (mark.frequency !== undefined) region.frequency = mark.frequency;
    regions.push(region);
  }
  return { regions, autoPredicates: [] };
}

export function annotationsToMarks(blocks: BlockInfo[], doc: AnnotationDoc): Map<number, BlockMark> {
  const byLabel = new Map(blocks.filter((b) => b.label).map((b) => [b.label!, b]));
  const marks = new Map<number, BlockMark>();
  for (const region of doc.regions) {
    let targets: BlockInfo[] = [];
    if (region.label !== undefined) {
      const block = byLabel.get(region.label);
      if (block) targets = [block];
    } else if (region.range !== undefined) {
      const [lo, hi] = region.range;
      targets = blocks.filter((b) => b.start <= hi && lo <= b.start + b.size - 1);
    }
    for (const block of targets) {
      const mark: BlockMark = { mark: region.mark };
      if (region.frequency !== undefined) mark.frequency = region.frequency;
      marks.set(block.id, mark);
    }
  }
  return marks;
}

export interface ConflictInfo {
  message: string;
  blockIds: number[];
}

export class WorkbenchStore {
  name = "";
  source = "";
  blocks: BlockInfo[] = [];
  marks = new Map<number, BlockMark>();

  estimate: EstimateDoc | null = null;
  previous: EstimateDoc | null = null;
  inFlight = false; // panel is stale while true
  conflict: ConflictInfo | null = null;

  period: number | null = null;
  load: Record<string, string> | null = null;
  periodError: string | null = null;

  private queue: Promise<unknown> = Promise.resolve();
  private periodGeneration = 0;
  private periodAbort: AbortController | null = null;
  listeners: Array<() => void> = [];

  constructor(readonly client: ApiClient) {}

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async open(name: string): Promise<ProgramDetail> {
    const detail = await this.client.getProgram(name);
    this.name = detail.name;
    this.source = detail.source;
    this.blocks = detail.blocks;
    this.marks = annotationsToMarks(detail.blocks, detail.annotations);
    this.previous = null;
    this.estimate = detail.estimate;
    this.conflict = null;
    this.notify();
    return detail;
  }

  /** none -> typical -> atypical -> none */
  nextMark(blockId: number): BlockMark | undefined {
    const current = this.marks.get(blockId);
    if (!current) return { mark: "typical" };
    if (current.mark === "typical") return { mark: "atypical" };
    return undefined;
  }

  async toggleBlock(blockId: number): Promise<void> {
    const next = this.nextMark(blockId);
    if (next) this.marks.set(blockId, next);
    else this.marks.delete(blockId);
    await this.sync();
  }

  async markBlocks(blockIds: number[], mark: Mark, frequency?: number): Promise<void> {
    for (const id of blockIds) {
      const entry: BlockMark = { mark };
      if (frequency !== undefined) entry.frequency = frequency;
      this.marks.set(id, entry);
    }
    await this.sync();
  }

  async clearMarks(): Promise<void> {
    this.marks.clear();
    await this.sync();
  }

  /** Serialize PUTs: responses land in request order, panel updates per response. */
  sync(): Promise<void> {
    const doc = marksToAnnotations(this.blocks, this.marks);
    this.inFlight = true;
    this.conflict = null;
    this.notify();
    const run = this.queue.then(async () => {
      try {
        const estimate = await this.client.putAnnotations(this.name, doc);
        this.previous = this.estimate;
        this.estimate = estimate;
        if (this.period !== null) await this.refreshLoad();
      } catch (err) {
        if (err instanceof ApiError && err.status === 422) {
          this.conflict = {
            message: err.detail || err.code,
            blockIds: [...err.detail.matchAll(/block (\d+)/g)].map((m) => Number(m[1])),
          };
        } else {
          throw err;
        }
      } finally {
        this.inFlight = false;
        this.notify();
      }
    });
    this.queue = run.catch(() => undefined);
    return run;
  }

  /** Load display: blank hides it, non-positive is a validation error. */
  async setPeriod(raw: string): Promise<void> {
    this.periodError = null;
    if (raw.trim() === "") {
      this.period = null;
      this.load = null;
      this.periodAbort?.abort();
      this.notify();
      return;
    }
    const period = Number(raw);
    if (!Number.isInteger(period) || period <= 0) {
      this.periodError = "period must be a positive integer number of cycles";
      this.load = null;
      this.notify();
      return;
    }
    this.period = period;
    await this.refreshLoad();
  }

  private async refreshLoad(): Promise<void> {
    const generation = ++this.periodGeneration;
    this.periodAbort?.abort(); // cancel the superseded request
    const abort = new AbortController();
    this.periodAbort = abort;
    try {
      const doc = await this.client.getEstimate(this.name, this.period!, abort.signal);
      if (generation === this.periodGeneration) {
        this.load = doc.load ?? null;
        this.notify();
      }
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      throw err;
    }
  }

  delta(): PanelDelta | null {
    if (!this.estimate || !this.previous) return null;
    return {
      bcet: this.estimate.bcet - this.previous.bcet,
      acet: Number(this.estimate.acet) - Number(this.previous.acet),
      wcet: this.estimate.wcet - this.previous.wcet,
    };
  }
}
