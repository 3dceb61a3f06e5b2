/**
 * DOM rendering: annotated source view, estimate panel, load calculator.
 *
 * Click a line to cycle its whole block through typical -> atypical -> clear
 * (marking is block-granular by design, so clicks snap to blocks).  Blocks in
 * the top fifth of worst-case contribution get a heat stripe; the panel is
 * dimmed while a request is in flight and only ever shows server numbers.
 */

import { EstimateDoc } from "./api.js";
import { WorkbenchStore, heatBlockIds, mapSourceLines } from "./state.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderSource(store: WorkbenchStore, container: HTMLElement): void {
  container.textContent = "";
  const estimate = store.estimate;
  const heat = estimate ? heatBlockIds(estimate) : new Set<number>();
  const blockOfAddress = new Map<number, number>();
  for (const block of store.blocks) {
    for (const addr of block.addresses) blockOfAddress.set(addr, block.id);
  }

  for (const line of mapSourceLines(store.source)) {
    const blockId = line.address !== null ? blockOfAddress.get(line.address) : undefined;
    const row = el("div", "line");
    const gutter = el("span", "gutter", blockId !== undefined ? `B${blockId}` : "");
    const text = el("span", "text", line.text || " ");
    row.append(gutter, text);
    if (blockId !== undefined) {
      const mark = store.marks.get(blockId);
      if (mark) row.classList.add(mark.mark); // shaded region = typical/atypical mark
      if (heat.has(blockId)) row.classList.add("heat");
      if (store.conflict?.blockIds.includes(blockId)) {
        row.classList.add("conflict");
        row.title = store.conflict.message;
      }
      row.dataset.block = String(blockId);
      row.addEventListener("click", () => {
        void store.toggleBlock(blockId);
      });
    }
    container.append(row);
  }

  if (store.conflict && store.conflict.blockIds.length === 0) {
    container.append(el("div", "conflict-banner", store.conflict.message));
  }
}

function formatDelta(value: number): string {
  if (value === 0) return "±0";
  return value > 0 ? `+${value.toFixed(2)}` : value.toFixed(2);
}

export function renderPanel(store: WorkbenchStore, container: HTMLElement): void {
  container.textContent = "";
  container.classList.toggle("stale", store.inFlight);
  const estimate: EstimateDoc | null = store.estimate;
  if (!estimate) {
    container.append(el("div", "placeholder", "no estimate yet"));
    return;
  }
  const delta = store.delta();
  const rows: Array<[string, string, number | null]> = [
    ["BCET", `${estimate.bcet} cycles`, delta ? delta.bcet : null],
    ["ACET", `${estimate.acet} cycles`, delta ? delta.acet : null],
    ["WCET", `${estimate.wcet} cycles`, delta ? delta.wcet : null],
  ];
  for (const [label, value, change] of rows) {
    const row = el("div", "estimate-row");
    row.append(el("span", "metric", label), el("span", "value", value));
    if (change !== null) row.append(el("span", "delta", formatDelta(change)));
    container.append(row);
  }

  if (store.periodError) {
    container.append(el("div", "period-error", store.periodError));
  } else if (store.load) {
    const row = el("div", "load-row");
    const percent = (Number(store.load.wcet) * 100).toFixed(2);
    const typical = (Number(store.load.acet) * 100).toFixed(2);
    row.append(el("span", "metric", "load"), el("span", "value", `${typical}% typical / ${percent}% worst`));
    container.append(row);
  }
}

export function renderLegend(container: HTMLElement): void {
  container.append(
    el(
      "div",
      "legend",
      "click a line: mark block typical -> atypical -> clear; " +
        "heat stripe = top 20% of worst-case contribution",
    ),
  );
}
