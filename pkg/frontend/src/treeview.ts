// Event-tree view: draws the tree from the server's render projection and
// drives staging — click situations to select them, apply a colour, run the
// greedy search for the rest, or delete a node's subtree.  The "finished"
// gate only opens once the server reports nothing left to colour.

import { AppContext } from "./app.js";
import { TreeRender } from "./api.js";
import { clear, el, svgEl } from "./dom.js";
import { layoutByLevel } from "./layout.js";

export const FLORET_COLOURS: Record<string, string> = {
  green: "#2f9e44",
  amber: "#f08c00",
  orange: "#e8590c",
};

export function mountTreeView(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  const colourInput = el("input", {
    type: "color",
    value: store.state.chosenColour,
    "data-testid": "stage-colour",
  });
  colourInput.addEventListener("change", () => {
    store.state.chosenColour = colourInput.value;
  });

  const applyColour = el("button", { "data-testid": "apply-colour" }, ["Update colour"]);
  applyColour.addEventListener("click", () => {
    const sid = store.state.sessionId;
    const picked = store.state.selectedNodes;
    if (!sid || picked.length === 0) return;
    ctx.track(
      api
        .stageGroups(sid, {
          groups: [picked],
          colours: [colourInput.value],
          revision: store.state.revision,
        })
        .then((resp) => {
          store.applyEnvelope(resp);
          store.update({ selectedNodes: [] });
        }),
    );
  });

  const runAhc = el("button", { "data-testid": "run-ahc" }, ["Colour using AHC"]);
  runAhc.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid) return;
    ctx.track(
      api.runAhc(sid, { revision: store.state.revision }).then((resp) => {
        store.applyEnvelope(resp);
        mergeNote.textContent = `AHC made ${resp.merges.length} merges.`;
      }),
    );
  });

  const deleteNode = el("button", { "data-testid": "delete-node" }, ["Delete selected"]);
  deleteNode.addEventListener("click", () => {
    const sid = store.state.sessionId;
    const picked = store.state.selectedNodes;
    if (!sid || picked.length === 0) return;
    ctx.track(
      api.deleteNodes(sid, { ids: picked, revision: store.state.revision }).then((resp) => {
        store.applyEnvelope(resp);
        store.update({ selectedNodes: [] });
      }),
    );
  });

  const clearSelection = el("button", {}, ["Clear selection"]);
  clearSelection.addEventListener("click", () => store.update({ selectedNodes: [] }));

  const finished = el("button", { "data-testid": "finished-colouring" }, ["Finished colouring"]);
  finished.addEventListener("click", () => store.update({ plot: "priors" }));

  const status = el("span", { class: "colour-status", "data-testid": "colour-status" });
  const mergeNote = el("span", { class: "merge-note" });
  const floretLegend = el("div", { class: "floret-legend", "data-testid": "floret-legend" });
  const svgHost = el("div", { class: "svg-host tree-svg-host" });

  container.append(
    el("div", { class: "view-toolbar" }, [
      el("label", {}, ["stage colour ", colourInput]),
      applyColour,
      runAhc,
      deleteNode,
      clearSelection,
      finished,
      status,
      mergeNote,
    ]),
    floretLegend,
    svgHost,
  );

  function toggleNode(id: string): void {
    const picked = store.state.selectedNodes;
    store.update({
      selectedNodes: picked.includes(id) ? picked.filter((n) => n !== id) : [...picked, id],
    });
  }

  function redraw(): void {
    const s = store.state;
    const tree = s.render.tree;

    const left = s.render.left_to_colour;
    clear(status);
    status.append(left === undefined ? "" : `Nodes left to colour: ${left}`);
    finished.disabled = left !== 0;
    applyColour.disabled = s.selectedNodes.length === 0;
    deleteNode.disabled = s.selectedNodes.length === 0;
    runAhc.disabled = !s.artifacts.tree;

    clear(floretLegend);
    const florets = s.render.floret_status ?? {};
    for (const [label, state] of Object.entries(florets)) {
      floretLegend.append(
        el(
          "span",
          {
            class: `floret-chip floret-${state}`,
            "data-floret": label,
            style: `border-color: ${FLORET_COLOURS[state] ?? "#888"}`,
          },
          [`${label}: ${state}`],
        ),
      );
    }

    clear(svgHost);
    if (!tree) {
      svgHost.append(el("p", {}, ["No event tree yet — build it from the toolbar above."]));
      return;
    }
    svgHost.append(drawTree(tree, s.selectedNodes, s.levelSeparation, toggleNode));
  }

  store.subscribe(redraw);
  redraw();
}

export function drawTree(
  tree: TreeRender,
  selected: string[],
  levelSeparation: number,
  onNodeClick?: (id: string) => void,
  edgeText?: (edge: { parent: string; child: string; label: string; count: number }) => string,
): SVGElement {
  const layout = layoutByLevel(tree.vertices, levelSeparation);
  const svg = svgEl("svg", {
    class: "tree-svg",
    viewBox: `0 0 ${layout.width} ${layout.height}`,
    width: layout.width,
    height: layout.height,
  });

  for (const edge of tree.edges) {
    const a = layout.points.get(edge.parent);
    const b = layout.points.get(edge.child);
    if (!a || !b) continue;
    svg.append(
      svgEl("line", {
        class: "tree-edge",
        x1: a.x,
        y1: a.y,
        x2: b.x,
        y2: b.y,
        stroke: "#999",
        "stroke-width": 1,
      }),
    );
    const text = edgeText ? edgeText(edge) : `${edge.label} (${edge.count})`;
    svg.append(
      svgEl(
        "text",
        {
          class: "edge-label",
          x: (a.x + b.x) / 2,
          y: (a.y + b.y) / 2 - 4,
          "font-size": 10,
          fill: "#444",
        },
        [text],
      ),
    );
  }

  const picked = new Set(selected);
  for (const vertex of tree.vertices) {
    const p = layout.points.get(vertex.id)!;
    const node = svgEl("circle", {
      class: `tree-node${vertex.is_leaf ? " leaf" : ""}${picked.has(vertex.id) ? " selected" : ""}`,
      "data-node": vertex.id,
      cx: p.x,
      cy: p.y,
      r: vertex.is_leaf ? 5 : 11,
      fill: vertex.is_leaf ? "#e9ecef" : vertex.colour,
      stroke: picked.has(vertex.id) ? "#1c1c1c" : "#666",
      "stroke-width": picked.has(vertex.id) ? 3 : 1,
    });
    if (!vertex.is_leaf && onNodeClick) {
      node.addEventListener("click", () => onNodeClick(vertex.id));
    }
    svg.append(node);
    svg.append(
      svgEl(
        "text",
        {
          class: "node-label",
          x: p.x,
          y: p.y + (vertex.is_leaf ? 14 : 22),
          "text-anchor": "middle",
          "font-size": 9,
          fill: "#555",
        },
        [vertex.id],
      ),
    );
  }
  return svg;
}
