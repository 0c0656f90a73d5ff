// CEG view: contracted graph with draggable nodes, adjustable level
// separation, incoming/outgoing edge highlighting, server-labelled edges, the
// posterior update table, the text summary, transient reduced graphs, and
// model comparison against another session.

import { AppContext } from "./app.js";
import { CegRender, UpdateTableRow } from "./api.js";
import { clear, el, option, svgEl } from "./dom.js";
import { edgeValueText, joinValues } from "./format.js";
import { edgePath, layoutByLevel, parallelBow } from "./layout.js";

const LABEL_MODES = ["posterior_mean", "posterior", "prior_mean", "prior", "none"];

export interface CegDrawOptions {
  levelSeparation: number;
  offsets?: Record<string, { dx: number; dy: number }>;
  selected?: string | null;
  onNodeClick?: (id: string) => void;
  onNodeDrag?: (id: string, dx: number, dy: number, done: boolean) => void;
  onNodeHover?: (id: string | null) => void;
}

export function mountCegView(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  const useData = el("input", { type: "checkbox", checked: true, "data-testid": "ceg-use-data" });
  useData.addEventListener("change", () => {
    store.state.cegUseData = useData.checked;
  });

  const labelMode = el("select", { "data-testid": "ceg-label-mode" });
  for (const mode of LABEL_MODES) {
    labelMode.append(option(mode, mode.replace("_", " "), mode === store.state.cegLabelMode));
  }
  labelMode.addEventListener("change", () => {
    store.state.cegLabelMode = labelMode.value;
    if (store.state.artifacts.ceg) buildNow();
  });

  const buildButton = el("button", { "data-testid": "build-ceg" }, ["Build CEG"]);
  buildButton.addEventListener("click", buildNow);

  function buildNow(): void {
    const sid = store.state.sessionId;
    if (!sid) return;
    ctx.track(
      api
        .buildCeg(sid, {
          use_data: store.state.cegUseData,
          label_mode: store.state.cegLabelMode,
          revision: store.state.revision,
        })
        .then((resp) => store.applyEnvelope(resp)),
    );
  }

  const slider = el("input", {
    type: "range",
    min: 60,
    max: 320,
    value: String(store.state.levelSeparation),
    "data-testid": "level-separation",
  });
  slider.addEventListener("input", () => {
    store.update({ levelSeparation: Number(slider.value) });
  });

  const tableButton = el("button", { "data-testid": "toggle-table" }, ["Show update table"]);
  const tableHost = el("div", { class: "table-host", "data-testid": "update-table-host", hidden: true });
  tableButton.addEventListener("click", () => {
    if (!tableHost.hidden) {
      tableHost.hidden = true;
      tableButton.textContent = "Show update table";
      return;
    }
    const sid = store.state.sessionId;
    if (!sid) return;
    ctx.track(
      api.cegTable(sid).then((resp) => {
        clear(tableHost);
        tableHost.append(updateTable(resp.table.payload.rows));
        tableHost.hidden = false;
        tableButton.textContent = "Hide update table";
      }),
    );
  });

  const summaryButton = el("button", { "data-testid": "toggle-summary" }, ["Show summary"]);
  const summaryHost = el("pre", { class: "summary-host", "data-testid": "summary-host", hidden: true });
  summaryButton.addEventListener("click", () => {
    if (!summaryHost.hidden) {
      summaryHost.hidden = true;
      summaryButton.textContent = "Show summary";
      return;
    }
    const sid = store.state.sessionId;
    if (!sid) return;
    ctx.track(
      api.cegSummary(sid).then((resp) => {
        summaryHost.textContent = resp.summary.text;
        summaryHost.hidden = false;
        summaryButton.textContent = "Hide summary";
      }),
    );
  });

  const reduceInput = el("input", {
    type: "text",
    placeholder: "labels, e.g. Solved or Male,Solved",
    "data-testid": "reduce-input",
  });
  const reduceButton = el("button", { "data-testid": "reduce-btn" }, ["Show reduced CEG"]);
  const reduceHost = el("div", { class: "reduce-host", "data-testid": "reduce-host" });
  reduceButton.addEventListener("click", () => {
    const sid = store.state.sessionId;
    const labels = reduceInput.value
      .split(",")
      .map((p) => p.trim())
      .filter(Boolean);
    if (!sid || labels.length === 0) return;
    ctx.track(
      api.reduceCeg(sid, { filter: labels }).then((resp) => {
        clear(reduceHost);
        reduceHost.append(
          el("p", { class: "reduce-caption" }, [
            `Reduced by ${resp.reduced_render.reduced_by.join(", ")} — ` +
              `${resp.reduced_render.positions.length} positions, ` +
              `${resp.reduced_render.edges.length} edges. ` +
              `This view is transient; the session's CEG is unchanged.`,
          ]),
          drawCeg(resp.reduced_render, { levelSeparation: 110 }),
        );
      }),
    );
  });

  const compareInput = el("input", {
    type: "text",
    placeholder: "other session id",
    "data-testid": "compare-input",
  });
  const compareButton = el("button", { "data-testid": "compare-btn" }, ["Compare models"]);
  const compareHost = el("pre", { class: "compare-host", "data-testid": "compare-host" });
  compareButton.addEventListener("click", () => {
    const sid = store.state.sessionId;
    const other = compareInput.value.trim();
    if (!sid || !other) return;
    ctx.track(
      api.compare(sid, { other_session: other }).then((resp) => {
        compareHost.textContent =
          resp.comparison.text + (resp.comparison.warning ? `\n${resp.comparison.warning}` : "");
      }),
    );
  });

  const svgHost = el("div", { class: "svg-host ceg-svg-host" });
  const hoverBox = el("div", { class: "stage-tooltip", "data-testid": "ceg-tooltip", hidden: true });

  container.append(
    el("div", { class: "view-toolbar" }, [
      buildButton,
      el("label", {}, [useData, " use observed data"]),
      el("label", {}, ["edge labels ", labelMode]),
      el("label", {}, ["level separation ", slider]),
    ]),
    el("div", { class: "view-toolbar" }, [
      tableButton,
      summaryButton,
      reduceInput,
      reduceButton,
      compareInput,
      compareButton,
    ]),
    svgHost,
    hoverBox,
    tableHost,
    summaryHost,
    reduceHost,
    compareHost,
  );

  function redraw(): void {
    const s = store.state;
    buildButton.disabled = !s.artifacts.staged_model;
    clear(svgHost);
    const ceg = s.render.ceg;
    if (!ceg) {
      svgHost.append(el("p", {}, ["No CEG yet — build the staged tree, then the CEG."]));
      return;
    }
    labelMode.value = ceg.label_mode;
    svgHost.append(
      drawCeg(ceg, {
        levelSeparation: s.levelSeparation,
        offsets: s.cegOffsets,
        selected: s.selectedCegNode,
        onNodeClick: (id) =>
          store.update({ selectedCegNode: s.selectedCegNode === id ? null : id }),
        onNodeDrag: (id, dx, dy, done) => {
          s.cegOffsets[id] = { dx, dy };
          if (done) store.update({});
        },
        onNodeHover: hoverStage,
      }),
    );
  }

  function hoverStage(id: string | null): void {
    clear(hoverBox);
    const ceg = store.state.render.ceg;
    if (!id || !ceg) {
      hoverBox.hidden = true;
      return;
    }
    const position = ceg.positions.find((p) => p.id === id);
    const moments = position ? store.state.render.stages?.[position.stage] : undefined;
    if (!position || !moments) {
      hoverBox.hidden = true;
      return;
    }
    hoverBox.hidden = false;
    hoverBox.append(
      el("strong", {}, [`${id} — stage ${position.stage}`]),
      el("div", {}, [`members: ${position.members.join(", ")}`]),
      el("div", {}, [`posterior mean: ${joinValues(moments.posterior_mean)}`]),
      el("div", {}, [`posterior variance: ${joinValues(moments.posterior_variance)}`]),
      el("div", {}, [`sample size: ${String(moments.ess)}`]),
    );
  }

  store.subscribe(redraw);
  redraw();
}

export function drawCeg(ceg: CegRender, options: CegDrawOptions): SVGElement {
  const maxLevel = Math.max(0, ...ceg.positions.map((p) => p.level));
  const nodes = [
    ...ceg.positions.map((p) => ({ id: p.id, level: p.level })),
    { id: ceg.sink.id, level: maxLevel + 1 },
  ];
  const layout = layoutByLevel(nodes, options.levelSeparation);
  const offsets = options.offsets ?? {};
  const place = (id: string) => {
    const base = layout.points.get(id)!;
    const off = offsets[id];
    return off ? { x: base.x + off.dx, y: base.y + off.dy } : base;
  };

  const svg = svgEl("svg", {
    class: "ceg-svg",
    viewBox: `0 0 ${layout.width} ${layout.height}`,
    width: layout.width,
    height: layout.height,
  });

  const selected = options.selected ?? null;
  const incoming = new Set(selected ? ceg.incoming[selected] ?? [] : []);
  const outgoing = new Set(selected ? ceg.outgoing[selected] ?? [] : []);

  // group parallel edges so they bow apart instead of overlapping
  const groups = new Map<string, number[]>();
  ceg.edges.forEach((edge, i) => {
    const key = `${edge.source}->${edge.target}`;
    const bucket = groups.get(key);
    if (bucket) bucket.push(i);
    else groups.set(key, [i]);
  });

  for (const bucket of groups.values()) {
    bucket.forEach((edgeIndex, slot) => {
      const edge = ceg.edges[edgeIndex];
      const a = place(edge.source);
      const b = place(edge.target);
      const bow = parallelBow(slot, bucket.length);
      const stroke = incoming.has(edgeIndex)
        ? "#1d4ed8"
        : outgoing.has(edgeIndex)
          ? "#dc2626"
          : "#9aa0a6";
      const width = incoming.has(edgeIndex) || outgoing.has(edgeIndex) ? 2.5 : 1.2;
      svg.append(
        svgEl("path", {
          class:
            "ceg-edge" +
            (incoming.has(edgeIndex) ? " edge-incoming" : "") +
            (outgoing.has(edgeIndex) ? " edge-outgoing" : ""),
          "data-edge": String(edgeIndex),
          d: edgePath(a, b, bow),
          fill: "none",
          stroke,
          "stroke-width": width,
        }),
      );
      const value = edgeValueText(edge.value);
      svg.append(
        svgEl(
          "text",
          {
            class: "edge-label",
            "data-edge-label": String(edgeIndex),
            x: (a.x + b.x) / 2,
            y: (a.y + b.y) / 2 - 4 - bow / 2,
            "font-size": 10,
            fill: "#444",
          },
          [value ? `${edge.label} ${value}` : edge.label],
        ),
      );
    });
  }

  for (const node of nodes) {
    const p = place(node.id);
    const isSink = node.id === ceg.sink.id;
    const position = ceg.positions.find((q) => q.id === node.id);
    const circle = svgEl("circle", {
      class: `ceg-node${isSink ? " sink" : ""}${selected === node.id ? " selected" : ""}`,
      "data-node": node.id,
      cx: p.x,
      cy: p.y,
      r: isSink ? 14 : 12,
      fill: isSink ? "#f1f3f5" : (position?.colour ?? "#FFFFFF"),
      stroke: selected === node.id ? "#1c1c1c" : "#666",
      "stroke-width": selected === node.id ? 3 : 1.2,
    });
    attachNodeBehaviour(circle, node.id, options);
    svg.append(circle);
    if (isSink) {
      svg.append(
        svgEl("circle", {
          class: "sink-ring",
          cx: p.x,
          cy: p.y,
          r: 17,
          fill: "none",
          stroke: "#666",
        }),
      );
    }
    svg.append(
      svgEl(
        "text",
        {
          class: "node-label",
          x: p.x,
          y: p.y + 26,
          "text-anchor": "middle",
          "font-size": 10,
          fill: "#333",
        },
        [node.id],
      ),
    );
  }
  return svg;
}

function attachNodeBehaviour(circle: SVGElement, id: string, options: CegDrawOptions): void {
  let dragging = false;
  let moved = false;
  let startX = 0;
  let startY = 0;
  let baseDx = 0;
  let baseDy = 0;

  circle.addEventListener("mousedown", (event) => {
    const e = event as MouseEvent;
    dragging = true;
    moved = false;
    startX = e.clientX;
    startY = e.clientY;
    const existing = options.offsets?.[id];
    baseDx = existing?.dx ?? 0;
    baseDy = existing?.dy ?? 0;
  });
  circle.addEventListener("mousemove", (event) => {
    if (!dragging || !options.onNodeDrag) return;
    const e = event as MouseEvent;
    const dx = baseDx + (e.clientX - startX);
    const dy = baseDy + (e.clientY - startY);
    if (Math.abs(e.clientX - startX) + Math.abs(e.clientY - startY) > 3) moved = true;
    if (moved) options.onNodeDrag(id, dx, dy, false);
  });
  circle.addEventListener("mouseup", (event) => {
    if (!dragging) return;
    dragging = false;
    const e = event as MouseEvent;
    if (moved && options.onNodeDrag) {
      options.onNodeDrag(id, baseDx + (e.clientX - startX), baseDy + (e.clientY - startY), true);
    } else if (options.onNodeClick) {
      options.onNodeClick(id);
    }
  });
  if (options.onNodeHover) {
    circle.addEventListener("mouseenter", () => options.onNodeHover!(id));
    circle.addEventListener("mouseleave", () => options.onNodeHover!(null));
  }
}

export function updateTable(rows: UpdateTableRow[]): HTMLTableElement {
  const table = el("table", { class: "update-table", "data-testid": "update-table" });
  table.append(
    el("thead", {}, [
      el("tr", {}, [
        el("th", {}, ["Stage"]),
        el("th", {}, ["Colour"]),
        el("th", {}, ["Edge labels"]),
        el("th", {}, ["Prior"]),
        el("th", {}, ["Prior mean"]),
        el("th", {}, ["Data"]),
        el("th", {}, ["Posterior"]),
        el("th", {}, ["Posterior mean"]),
      ]),
    ]),
  );
  const body = el("tbody");
  for (const row of rows) {
    body.append(
      el("tr", { "data-stage-row": row.stage }, [
        el("td", { "data-field": "stage" }, [row.stage]),
        el("td", { "data-field": "colour" }, [
          el("span", { class: "colour-chip", style: `background:${row.colour}` }),
          ` ${row.colour}`,
        ]),
        el("td", { "data-field": "labels" }, [row.labels.join(", ")]),
        el("td", { "data-field": "prior" }, [joinValues(row.prior)]),
        el("td", { "data-field": "prior_mean" }, [joinValues(row.prior_mean)]),
        el("td", { "data-field": "data" }, [joinValues(row.data)]),
        el("td", { "data-field": "posterior" }, [joinValues(row.posterior)]),
        el("td", { "data-field": "posterior_mean" }, [joinValues(row.posterior_mean)]),
      ]),
    );
  }
  table.append(body);
  return table;
}
