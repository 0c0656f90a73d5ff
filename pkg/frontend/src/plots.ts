// Plots tab: hosts the modelling workflow — event tree colouring, prior
// entry, staged-tree inspection, the CEG, and the area map — behind a small
// sub-navigation.  Build gates follow the server's artifact flags.

import { AppContext } from "./app.js";
import { clear, el } from "./dom.js";
import { PlotName } from "./state.js";
import { mountTreeView } from "./treeview.js";
import { mountPriorsPanel } from "./priorspanel.js";
import { mountStagedView } from "./stagedview.js";
import { mountCegView } from "./cegview.js";
import { mountMapView } from "./mapview.js";

const PLOTS: { name: PlotName; label: string }[] = [
  { name: "tree", label: "Event tree" },
  { name: "priors", label: "Priors" },
  { name: "staged", label: "Staged tree" },
  { name: "ceg", label: "CEG" },
  { name: "map", label: "Map" },
];

export function mountPlots(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  const subNav = el("nav", { class: "plot-nav" });
  for (const plot of PLOTS) {
    subNav.append(
      el(
        "button",
        {
          class: "plot-button",
          "data-plot": plot.name,
          onclick: () => store.update({ plot: plot.name }),
        },
        [plot.label],
      ),
    );
  }

  const buildTree = el("button", { "data-testid": "build-tree" }, ["Build event tree"]);
  buildTree.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid) return;
    ctx.track(
      api.buildTree(sid, { revision: store.state.revision }).then((resp) => {
        store.applyEnvelope(resp);
        store.update({ plot: "tree", selectedNodes: [] });
      }),
    );
  });

  const gateNote = el("span", { class: "gate-note" });

  const views: Record<PlotName, HTMLElement> = {
    tree: el("div", { class: "plot-view", "data-view": "tree" }),
    priors: el("div", { class: "plot-view", "data-view": "priors" }),
    staged: el("div", { class: "plot-view", "data-view": "staged" }),
    ceg: el("div", { class: "plot-view", "data-view": "ceg" }),
    map: el("div", { class: "plot-view", "data-view": "map" }),
  };

  container.append(
    el("h2", {}, ["Plots"]),
    el("div", { class: "plot-toolbar" }, [buildTree, gateNote]),
    subNav,
    views.tree,
    views.priors,
    views.staged,
    views.ceg,
    views.map,
  );

  mountTreeView(views.tree, ctx);
  mountPriorsPanel(views.priors, ctx);
  mountStagedView(views.staged, ctx);
  mountCegView(views.ceg, ctx);
  mountMapView(views.map, ctx);

  function redraw(): void {
    const s = store.state;
    buildTree.disabled = !s.artifacts.dataset;
    clear(gateNote);
    if (!s.artifacts.dataset) {
      gateNote.append("Upload a dataset to begin.");
    } else if (!s.artifacts.tree) {
      gateNote.append("Build the event tree from the current column selection.");
    }
    for (const plot of PLOTS) {
      const button = subNav.querySelector<HTMLButtonElement>(`[data-plot="${plot.name}"]`)!;
      button.classList.toggle("active", s.plot === plot.name);
      views[plot.name].hidden = s.plot !== plot.name;
    }
  }

  store.subscribe(redraw);
  redraw();
}
