/**
 * Workbench bootstrap: pick a program, wire the store to the panels.
 *
 * The service base URL defaults to the page origin and can be overridden
 * with `?api=http://127.0.0.1:8321` when the page is opened from disk.
 */

import { ApiClient } from "./api.js";
import { WorkbenchStore } from "./state.js";
import { renderLegend, renderPanel, renderSource } from "./view.js";

function baseUrl(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  if (override) return override;
  return window.location.origin;
}

async function boot(): Promise<void> {
  const client = new ApiClient(baseUrl());
  const store = new WorkbenchStore(client);

  const picker = document.getElementById("program-picker") as HTMLSelectElement;
  const sourcePane = document.getElementById("source")!;
  const panel = document.getElementById("panel")!;
  const periodInput = document.getElementById("period") as HTMLInputElement;
  const clearButton = document.getElementById("clear-marks")!;

  const redraw = () => {
    renderSource(store, sourcePane);
    renderPanel(store, panel);
  };
  store.listeners.push(redraw);

  const names = await client.listPrograms();
  for (const name of names) {
    const option = document.createElement("option");
    option.value = option.textContent = name;
    picker.append(option);
  }
  picker.addEventListener("change", () => void store.open(picker.value));
  periodInput.addEventListener("change", () => void store.setPeriod(periodInput.value));
  clearButton.addEventListener("click", () => void store.clearMarks());

  renderLegend(document.getElementById("legend")!);
  if (names.length) {
    picker.value = names[0]!;
    await store.open(names[0]!);
  }
}

void boot();
