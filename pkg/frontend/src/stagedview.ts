// Staged-tree view: the coloured tree again, but edges now carry the stage
// vectors the server computed.  A selector flips edge labels between prior
// parameters, prior means, posterior parameters, and posterior means, and
// hovering a situation shows that stage's full moment summary.

import { AppContext } from "./app.js";
import { StageMoments } from "./api.js";
import { clear, el, option } from "./dom.js";
import { joinValues } from "./format.js";
import { drawTree } from "./treeview.js";

const LABEL_FIELDS: { value: string; label: string }[] = [
  { value: "prior", label: "prior parameters" },
  { value: "prior_mean", label: "prior means" },
  { value: "posterior", label: "posterior parameters" },
  { value: "posterior_mean", label: "posterior means" },
];

export function mountStagedView(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  // member situation id -> stage name, from the staged model payload
  let memberStage: Map<string, string> = new Map();
  let modelRevision = -1;

  const fieldSelect = el("select", { "data-testid": "stage-label-field" });
  for (const field of LABEL_FIELDS) {
    fieldSelect.append(option(field.value, field.label, field.value === store.state.stageLabelField));
  }
  fieldSelect.addEventListener("change", () => {
    store.update({ stageLabelField: fieldSelect.value });
  });

  const svgHost = el("div", { class: "svg-host staged-svg-host" });
  const tooltip = el("div", { class: "stage-tooltip", "data-testid": "stage-tooltip", hidden: true });

  container.append(
    el("div", { class: "view-toolbar" }, [el("label", {}, ["edge labels show ", fieldSelect])]),
    svgHost,
    tooltip,
  );

  function loadModel(): void {
    const s = store.state;
    if (!s.sessionId || !s.artifacts.staged_model || s.plot !== "staged") return;
    if (modelRevision === s.revision) return;
    modelRevision = s.revision;
    ctx.track(
      api.getStagedTree(s.sessionId).then((resp) => {
        const models = resp.staged_tree.payload.stage_models;
        memberStage = new Map();
        for (const model of models) {
          for (const member of model.members) memberStage.set(member, model.stage_id);
        }
        drawModel();
      }),
    );
  }

  function stageFor(vertexId: string): StageMoments | undefined {
    const name = memberStage.get(vertexId);
    if (!name) return undefined;
    return store.state.render.stages?.[name];
  }

  function drawModel(): void {
    const s = store.state;
    clear(svgHost);
    const tree = s.render.tree;
    if (!tree || !s.artifacts.staged_model) {
      svgHost.append(el("p", {}, ["Build the staged tree from the Priors panel first."]));
      return;
    }

    const field = s.stageLabelField as keyof StageMoments;
    const svg = drawTree(tree, [], s.levelSeparation, undefined, (edge) => {
      const moments = stageFor(edge.parent);
      if (!moments) return edge.label;
      const index = moments.labels.indexOf(edge.label);
      const vector = moments[field];
      if (index < 0 || !Array.isArray(vector)) return edge.label;
      return `${edge.label}: ${String(vector[index])}`;
    });

    for (const node of svg.querySelectorAll<SVGElement>("circle.tree-node:not(.leaf)")) {
      const id = node.getAttribute("data-node")!;
      node.addEventListener("mouseenter", () => showTooltip(id));
      node.addEventListener("mouseleave", () => {
        tooltip.hidden = true;
      });
    }
    svgHost.append(svg);
  }

  function showTooltip(vertexId: string): void {
    const name = memberStage.get(vertexId);
    const moments = stageFor(vertexId);
    clear(tooltip);
    if (!name || !moments) return;
    tooltip.hidden = false;
    tooltip.append(
      el("strong", {}, [`${vertexId} — stage ${name}`]),
      line("edge labels", moments.labels.join(", ")),
      line("prior", joinValues(moments.prior)),
      line("prior mean", joinValues(moments.prior_mean)),
      line("prior variance", joinValues(moments.prior_variance)),
      line("data", joinValues(moments.data)),
      line("posterior", joinValues(moments.posterior)),
      line("posterior mean", joinValues(moments.posterior_mean)),
      line("posterior variance", joinValues(moments.posterior_variance)),
      line("sample size", String(moments.ess)),
    );
  }

  function line(label: string, value: string): HTMLElement {
    return el("div", { class: "tooltip-line" }, [
      el("span", { class: "tooltip-key" }, [label + ": "]),
      value,
    ]);
  }

  function redraw(): void {
    loadModel();
    drawModel();
  }

  store.subscribe(redraw);
  redraw();
}
