// Thin typed client for the cegforge session service.  Every call returns the
// server's response body verbatim; the workbench never computes model numbers
// itself, it only displays what these payloads carry.

export interface TreeVertex {
  id: string;
  level: number;
  is_leaf: boolean;
  colour: string;
  staged: boolean;
}

export interface TreeEdge {
  parent: string;
  child: string;
  label: string;
  count: number;
}

export interface TreeRender {
  vertices: TreeVertex[];
  edges: TreeEdge[];
}

export interface StageMoments {
  labels: string[];
  prior: number[];
  prior_mean: number[];
  prior_variance: number[];
  data: number[];
  posterior: number[];
  posterior_mean: number[];
  posterior_variance: number[];
  ess: number;
}

export interface CegPosition {
  id: string;
  level: number;
  members: string[];
  stage: string;
  colour: string;
}

export interface CegEdge {
  source: string;
  target: string;
  label: string;
  stage: string;
  value: number | null;
}

export interface CegRender {
  positions: CegPosition[];
  sink: { id: string; members: string[] };
  edges: CegEdge[];
  incoming: Record<string, number[]>;
  outgoing: Record<string, number[]>;
  label_mode: string;
  reduced_by: string[];
}

export interface RenderState {
  tree?: TreeRender;
  left_to_colour?: number;
  colour_counts?: Record<string, number>;
  floret_status?: Record<string, string>;
  stages?: Record<string, StageMoments>;
  ceg?: CegRender;
}

export interface Envelope {
  session_id: string;
  revision: number;
  artifacts: Record<string, boolean>;
  render: RenderState;
}

export interface DatasetBlock {
  column_names: string[];
  n_rows: number;
  preview: string[][];
  levels: Record<string, string[]>;
  area_column: string | null;
  time_column: string | null;
  selection: string[] | null;
  fingerprint: string;
}

export interface PriorRow {
  name: string;
  stage_id: string;
  colour: string;
  level: number;
  labels: string[];
  members: string[];
  prior: number[] | null;
}

export interface PriorsBlock {
  payload: { rows: PriorRow[] };
  text: string;
  colour_key: string;
  complete: boolean;
}

export interface UpdateTableRow {
  stage: string;
  colour: string;
  labels: string[];
  prior: number[];
  prior_mean: number[];
  data: number[];
  posterior: number[];
  posterior_mean: number[];
}

export interface TableBlock {
  payload: { rows: UpdateTableRow[] };
  text: string;
  csv: string;
}

export interface StagedTreeBlock {
  payload: { stage_models: StagedStageModel[]; label_type: string };
  updated?: { stage_models: StagedStageModel[] };
  update_table?: { rows: UpdateTableRow[] };
}

export interface StagedStageModel {
  stage_id: string;
  members: string[];
  labels: string[];
  prior: number[];
  data: number[];
  posterior: number[];
}

export interface MapFeature {
  name: string;
  geometry: Geometry;
  matched: boolean;
  properties: Record<string, unknown>;
}

export interface Geometry {
  type: string;
  coordinates: unknown;
}

export interface MapBlock {
  payload: { name_property: string; features: MapFeature[] };
  matched: string[];
  names: string[];
}

export interface ProbabilityRow {
  area: string;
  category: string;
  probability: number;
  path_mass: number;
}

export interface ProbabilitiesBlock {
  payload: {
    colour_by_variable: string;
    conditionals: string[];
    rows: ProbabilityRow[];
  };
  csv: string;
}

export interface MapDocumentFeature {
  type: string;
  geometry: Geometry;
  properties: {
    name: string;
    matched: boolean;
    probability: number | null;
    label: string;
    fill: string | null;
    pattern: string | null;
  };
}

export interface MapDocument {
  type: string;
  features: MapDocumentFeature[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Api {
  constructor(
    public base: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async call(method: string, path: string, body?: unknown): Promise<any> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const text = await resp.text();
    let data: any = {};
    if (text) {
      try {
        data = JSON.parse(text);
      } catch {
        data = { detail: text };
      }
    }
    if (!resp.ok) {
      const detail =
        typeof data.detail === "string" ? data.detail : JSON.stringify(data.detail ?? text);
      throw new ApiError(resp.status, detail);
    }
    return data;
  }

  // -- lifecycle ----------------------------------------------------------

  createSession(): Promise<Envelope> {
    return this.call("POST", "/sessions");
  }

  listSessions(): Promise<{ sessions: unknown[] }> {
    return this.call("GET", "/sessions");
  }

  getSession(sid: string): Promise<Envelope> {
    return this.call("GET", `/sessions/${sid}`);
  }

  deleteSession(sid: string): Promise<{ deleted: boolean }> {
    return this.call("DELETE", `/sessions/${sid}`);
  }

  getArchive(sid: string): Promise<any> {
    return this.call("GET", `/sessions/${sid}/archive`);
  }

  loadArchive(archive: unknown): Promise<Envelope> {
    return this.call("POST", "/sessions/load", { archive });
  }

  // -- data ----------------------------------------------------------------

  uploadDataset(
    sid: string,
    body: {
      csv_text: string;
      header?: boolean;
      separator?: string;
      quote?: string;
      exclude_first_column?: boolean;
      area_column?: string;
      time_column?: string;
      time_granularity?: string;
      time_format?: string;
      preview?: number;
      revision?: number;
    },
  ): Promise<Envelope & { dataset: DatasetBlock }> {
    return this.call("POST", `/sessions/${sid}/dataset`, body);
  }

  getDataset(sid: string, preview = 10): Promise<Envelope & { dataset: DatasetBlock }> {
    return this.call("GET", `/sessions/${sid}/dataset?preview=${preview}`);
  }

  selectColumns(
    sid: string,
    body: { columns: string[]; prediction_variable?: string; revision?: number },
  ): Promise<Envelope & { dataset: DatasetBlock }> {
    return this.call("POST", `/sessions/${sid}/columns`, body);
  }

  filterRows(
    sid: string,
    body: { area_subset?: string[]; time_range?: [string, string]; revision?: number },
  ): Promise<Envelope & { dataset: DatasetBlock }> {
    return this.call("POST", `/sessions/${sid}/filter`, body);
  }

  // -- tree ------------------------------------------------------------------

  buildTree(
    sid: string,
    body: { columns?: (string | number)[]; revision?: number } = {},
  ): Promise<Envelope & { tree: { payload: any; summary: string; dot: string } }> {
    return this.call("POST", `/sessions/${sid}/tree`, body);
  }

  getTree(sid: string): Promise<Envelope & { tree: { payload: any; summary: string; dot: string } }> {
    return this.call("GET", `/sessions/${sid}/tree`);
  }

  deleteNodes(
    sid: string,
    body: { ids: string[]; revision?: number },
  ): Promise<Envelope & { tree: { payload: any; summary: string; dot: string } }> {
    return this.call("POST", `/sessions/${sid}/tree/delete`, body);
  }

  // -- staging -----------------------------------------------------------------

  stageGroups(
    sid: string,
    body: { groups: string[][]; colours?: string[]; revision?: number },
  ): Promise<Envelope & { staging: { payload: any; summary: string; left_to_colour: number } }> {
    return this.call("POST", `/sessions/${sid}/staging/groups`, body);
  }

  runAhc(
    sid: string,
    body: { revision?: number } = {},
  ): Promise<
    Envelope & {
      staging: { payload: any; summary: string; left_to_colour: number };
      merges: { merged: string[][]; logbf: number }[];
    }
  > {
    return this.call("POST", `/sessions/${sid}/staging/ahc`, body);
  }

  getStaging(
    sid: string,
  ): Promise<Envelope & { staging: { payload: any; summary: string; left_to_colour: number } }> {
    return this.call("GET", `/sessions/${sid}/staging`);
  }

  // -- priors and models ---------------------------------------------------------

  getPriors(sid: string): Promise<Envelope & { priors: PriorsBlock }> {
    return this.call("GET", `/sessions/${sid}/priors`);
  }

  setPriors(
    sid: string,
    body: { mode: string; overrides?: Record<string, number[]>; revision?: number },
  ): Promise<Envelope & { priors: PriorsBlock }> {
    return this.call("POST", `/sessions/${sid}/priors`, body);
  }

  buildStagedTree(
    sid: string,
    body: { label_type?: string; revision?: number } = {},
  ): Promise<Envelope & { staged_tree: StagedTreeBlock }> {
    return this.call("POST", `/sessions/${sid}/staged-tree`, body);
  }

  getStagedTree(sid: string): Promise<Envelope & { staged_tree: StagedTreeBlock }> {
    return this.call("GET", `/sessions/${sid}/staged-tree`);
  }

  // -- CEG -------------------------------------------------------------------------

  buildCeg(
    sid: string,
    body: { use_data?: boolean; label_mode?: string; revision?: number } = {},
  ): Promise<Envelope & { ceg: { payload: any; dot: string } }> {
    return this.call("POST", `/sessions/${sid}/ceg`, body);
  }

  getCeg(sid: string): Promise<Envelope & { ceg: { payload: any; dot: string } }> {
    return this.call("GET", `/sessions/${sid}/ceg`);
  }

  reduceCeg(
    sid: string,
    body: { filter: string[] },
  ): Promise<Envelope & { ceg: { payload: any; dot: string }; reduced_render: CegRender }> {
    return this.call("POST", `/sessions/${sid}/ceg/reduced`, body);
  }

  cegSummary(sid: string): Promise<Envelope & { summary: { payload: any; text: string } }> {
    return this.call("GET", `/sessions/${sid}/ceg/summary`);
  }

  cegTable(sid: string): Promise<Envelope & { table: TableBlock }> {
    return this.call("GET", `/sessions/${sid}/ceg/table`);
  }

  compare(
    sid: string,
    body: { other_session?: string; other?: unknown },
  ): Promise<Envelope & { comparison: { payload: any; text: string; warning: string | null } }> {
    return this.call("POST", `/sessions/${sid}/ceg/compare`, body);
  }

  // -- maps ---------------------------------------------------------------------------

  uploadGeo(
    sid: string,
    body: { geojson: string | object; name_property?: string; crs?: string; revision?: number },
  ): Promise<Envelope & { map: MapBlock }> {
    return this.call("POST", `/sessions/${sid}/map/geo`, body);
  }

  getGeo(sid: string): Promise<Envelope & { map: MapBlock }> {
    return this.call("GET", `/sessions/${sid}/map/geo`);
  }

  mapProbabilities(
    sid: string,
    body: { colour_by: string; conditionals?: string[]; palette?: string },
  ): Promise<Envelope & { probabilities: ProbabilitiesBlock; document: MapDocument }> {
    return this.call("POST", `/sessions/${sid}/map/probabilities`, body);
  }
}
