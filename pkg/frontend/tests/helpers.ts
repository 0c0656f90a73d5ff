// Shared test harness: canned service responses captured from a real session
// (fixtures.json) plus a fake Api that replays them while recording calls.

import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { Api, Envelope } from "../src/api.js";
import { AppContext, StorageLike, createApp } from "../src/app.js";

const raw = JSON.parse(readFileSync(resolve(process.cwd(), "tests/fixtures.json"), "utf8"));

export const FIXTURES: Record<string, any> = raw;

export function envelopeOf(name: string): Envelope & Record<string, any> {
  return structuredClone(FIXTURES[name]);
}

export class MemStorage implements StorageLike {
  private items = new Map<string, string>();
  getItem(key: string): string | null {
    return this.items.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.items.set(key, value);
  }
  removeItem(key: string): void {
    this.items.delete(key);
  }
}

export interface RecordedCall {
  method: string;
  args: unknown[];
}

/**
 * Replays the canned responses.  Individual tests override `responses` to
 * shape a scenario; every call lands in `calls` for assertions.
 */
export function makeFakeApi(overrides: Partial<Record<keyof Api, any>> = {}): {
  api: Api;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const canned: Record<string, () => any> = {
    createSession: () => envelopeOf("created"),
    getSession: () => envelopeOf("ceg"),
    getDataset: () => envelopeOf("dataset"),
    uploadDataset: () => envelopeOf("dataset"),
    selectColumns: () => envelopeOf("dataset"),
    filterRows: () => envelopeOf("dataset"),
    buildTree: () => envelopeOf("tree"),
    getTree: () => envelopeOf("tree"),
    deleteNodes: () => envelopeOf("tree"),
    stageGroups: () => envelopeOf("groups"),
    runAhc: () => envelopeOf("ahc"),
    getStaging: () => envelopeOf("ahc"),
    getPriors: () => envelopeOf("skeleton"),
    setPriors: () => envelopeOf("priors"),
    buildStagedTree: () => envelopeOf("staged"),
    getStagedTree: () => envelopeOf("staged"),
    buildCeg: () => envelopeOf("ceg"),
    getCeg: () => envelopeOf("ceg"),
    reduceCeg: () => envelopeOf("reduced"),
    cegSummary: () => envelopeOf("summary"),
    cegTable: () => envelopeOf("table"),
    compare: () => ({
      ...envelopeOf("ceg"),
      comparison: {
        payload: { log_bayes_factor: 0 },
        text: "Log Bayes factor of Model 1 vs Model 2: 0 (equal scores)",
        warning: null,
      },
    }),
    uploadGeo: () => envelopeOf("geo"),
    getGeo: () => envelopeOf("geo"),
    mapProbabilities: () => envelopeOf("probabilities"),
    listSessions: () => ({ sessions: [] }),
    deleteSession: () => ({ deleted: true }),
    getArchive: () => ({}),
    loadArchive: () => envelopeOf("ceg"),
  };

  const api: any = {};
  for (const [name, producer] of Object.entries(canned)) {
    const override = (overrides as any)[name];
    api[name] = (...args: unknown[]) => {
      calls.push({ method: name, args });
      const result = override ? override(...args) : producer();
      return Promise.resolve(result);
    };
  }
  return { api: api as Api, calls };
}

export function callsTo(calls: RecordedCall[], method: string): RecordedCall[] {
  return calls.filter((c) => c.method === method);
}

/** Build a full app around the fake api and wait for the initial load. */
export async function appWithFakeApi(
  overrides: Partial<Record<keyof Api, any>> = {},
): Promise<{ ctx: AppContext; calls: RecordedCall[]; root: HTMLElement }> {
  const { api, calls } = makeFakeApi(overrides);
  const root = document.createElement("div");
  document.body.append(root);
  const ctx = await createApp(root, api, new MemStorage());
  await ctx.whenIdle();
  return { ctx, calls, root };
}

export function click(element: Element | null): void {
  if (!element) throw new Error("click target not found");
  const target = element as HTMLElement;
  if (typeof target.click === "function") {
    target.click();
  } else {
    element.dispatchEvent(new MouseEvent("click", { bubbles: true, cancelable: true }));
  }
}

export function setValue(element: Element | null, value: string): void {
  if (!element) throw new Error("input target not found");
  const input = element as HTMLInputElement;
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function text(element: Element | null): string {
  return element?.textContent ?? "";
}
