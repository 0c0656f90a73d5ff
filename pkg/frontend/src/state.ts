// Central workbench state.  Everything that describes the model lives on the
// server; this store keeps the latest envelope plus purely view-local choices
// (active tab, pending selections, draggable layout offsets).  Selections are
// pruned against each new render projection so the UI can never reference a
// node the server no longer knows about.

import { ApiError, DatasetBlock, Envelope, RenderState } from "./api.js";

export type TabName = "upload" | "select" | "plots";
export type PlotName = "tree" | "priors" | "staged" | "ceg" | "map";

export interface AppState {
  sessionId: string | null;
  revision: number;
  artifacts: Record<string, boolean>;
  render: RenderState;
  dataset: DatasetBlock | null;

  tab: TabName;
  plot: PlotName;

  // tree colouring
  selectedNodes: string[];
  chosenColour: string;

  // prior entry
  priorMode: string;
  priorDrafts: Record<string, string>;

  // staged-tree display
  stageLabelField: string;

  // CEG display
  cegLabelMode: string;
  cegUseData: boolean;
  selectedCegNode: string | null;
  cegOffsets: Record<string, { dx: number; dy: number }>;
  levelSeparation: number;

  // map display
  mapPalette: string;
  mapColourBy: string;
  mapConditionals: string[];
  mapOpacity: number;
  mapClickMode: "inspect" | "floret";

  error: string | null;
  conflict: boolean;
}

function defaults(): AppState {
  return {
    sessionId: null,
    revision: 0,
    artifacts: {},
    render: {},
    dataset: null,
    tab: "upload",
    plot: "tree",
    selectedNodes: [],
    chosenColour: "#bb2244",
    priorMode: "uniform",
    priorDrafts: {},
    stageLabelField: "posterior_mean",
    cegLabelMode: "posterior_mean",
    cegUseData: true,
    selectedCegNode: null,
    cegOffsets: {},
    levelSeparation: 150,
    mapPalette: "viridis",
    mapColourBy: "",
    mapConditionals: [],
    mapOpacity: 0.85,
    mapClickMode: "inspect",
    error: null,
    conflict: false,
  };
}

export class Store {
  state: AppState;
  private listeners: (() => void)[] = [];

  constructor(initial: Partial<AppState> = {}) {
    this.state = { ...defaults(), ...initial };
  }

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  private emit(): void {
    for (const fn of [...this.listeners]) fn();
  }

  update(patch: Partial<AppState>): void {
    Object.assign(this.state, patch);
    this.emit();
  }

  /** Merge a server envelope and drop any local selections it invalidated. */
  applyEnvelope(env: Envelope): void {
    this.state.sessionId = env.session_id;
    this.state.revision = env.revision;
    this.state.artifacts = env.artifacts ?? {};
    this.state.render = env.render ?? {};
    this.pruneSelections();
    this.state.error = null;
    this.state.conflict = false;
    this.emit();
  }

  private pruneSelections(): void {
    const s = this.state;
    const situations = new Set(
      (s.render.tree?.vertices ?? []).filter((v) => !v.is_leaf).map((v) => v.id),
    );
    s.selectedNodes = s.selectedNodes.filter((id) => situations.has(id));

    const ceg = s.render.ceg;
    const cegIds = new Set<string>();
    if (ceg) {
      for (const p of ceg.positions) cegIds.add(p.id);
      cegIds.add(ceg.sink.id);
    }
    if (s.selectedCegNode && !cegIds.has(s.selectedCegNode)) s.selectedCegNode = null;
    for (const id of Object.keys(s.cegOffsets)) {
      if (!cegIds.has(id)) delete s.cegOffsets[id];
    }

    if (ceg) {
      const labels = new Set(ceg.edges.map((e) => e.label));
      s.mapConditionals = s.mapConditionals.filter((l) => labels.has(l));
      const outcomes = new Set(
        ceg.edges.filter((e) => e.target === ceg.sink.id).map((e) => e.label),
      );
      if (s.mapColourBy && !outcomes.has(s.mapColourBy)) s.mapColourBy = "";
    }
  }

  /** Route an error into the banner; stale-revision conflicts get a reload hint. */
  fail(err: unknown): void {
    if (err instanceof ApiError && err.status === 409 && /stale revision/.test(err.detail)) {
      this.update({ error: err.detail, conflict: true });
    } else if (err instanceof ApiError) {
      this.update({ error: err.detail, conflict: false });
    } else {
      this.update({ error: String(err), conflict: false });
    }
  }
}
