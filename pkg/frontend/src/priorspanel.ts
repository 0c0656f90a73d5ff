// Priors panel: shows the server's stage skeleton (one row per stage with its
// outgoing edge labels) and lets the user pick uniform or phantom defaults or
// type custom vectors per stage.  Once the server reports the table complete,
// the staged tree can be built.

import { AppContext } from "./app.js";
import { PriorsBlock } from "./api.js";
import { clear, el, option } from "./dom.js";
import { joinValues, parseVector } from "./format.js";

export function mountPriorsPanel(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  let skeleton: PriorsBlock | null = null;
  let skeletonRevision = -1;

  const modeSelect = el("select", { "data-testid": "prior-mode" }, [
    option("uniform", "Uniform (all ones)"),
    option("phantom", "Phantom sample spread"),
    option("custom", "Custom vectors"),
  ]);
  modeSelect.value = store.state.priorMode;
  modeSelect.addEventListener("change", () => {
    store.update({ priorMode: modeSelect.value });
  });

  const applyButton = el("button", { "data-testid": "apply-priors" }, ["Apply priors"]);
  applyButton.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid) return;
    const body: Parameters<typeof api.setPriors>[1] = {
      mode: store.state.priorMode,
      revision: store.state.revision,
    };
    if (store.state.priorMode === "custom") {
      const overrides: Record<string, number[]> = {};
      for (const [name, draft] of Object.entries(store.state.priorDrafts)) {
        if (!draft.trim()) continue;
        const vector = parseVector(draft);
        if (!vector) {
          store.update({ error: `prior for ${name} must be comma-separated numbers` });
          return;
        }
        overrides[name] = vector;
      }
      if (Object.keys(overrides).length > 0) body.overrides = overrides;
    }
    ctx.track(
      api.setPriors(sid, body).then((resp) => {
        skeleton = resp.priors;
        skeletonRevision = resp.revision;
        store.applyEnvelope(resp);
      }),
    );
  });

  const finishButton = el("button", { "data-testid": "finished-priors" }, [
    "Finished prior specification",
  ]);
  finishButton.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid) return;
    ctx.track(
      api.buildStagedTree(sid, { revision: store.state.revision }).then((resp) => {
        store.applyEnvelope(resp);
        store.update({ plot: "staged" });
      }),
    );
  });

  const rowsHost = el("div", { class: "prior-rows" });
  const textHost = el("pre", { class: "prior-text", "data-testid": "prior-text" });
  const keyHost = el("pre", { class: "colour-key" });

  container.append(
    el("div", { class: "view-toolbar" }, [
      el("label", {}, ["mode ", modeSelect]),
      applyButton,
      finishButton,
    ]),
    rowsHost,
    textHost,
    keyHost,
  );

  function loadSkeleton(): void {
    const s = store.state;
    const sid = s.sessionId;
    if (!sid || !s.artifacts.staging || s.plot !== "priors") return;
    if (skeletonRevision === s.revision) return;
    skeletonRevision = s.revision;
    ctx.track(
      api.getPriors(sid).then((resp) => {
        skeleton = resp.priors;
        redrawRows();
      }),
    );
  }

  function redrawRows(): void {
    const s = store.state;
    clear(rowsHost);
    clear(textHost);
    clear(keyHost);
    if (!skeleton) {
      finishButton.disabled = true;
      rowsHost.append(el("p", {}, ["Finish colouring the tree to define stages first."]));
      return;
    }

    const table = el("table", { class: "prior-table" });
    table.append(
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["Stage"]),
          el("th", {}, ["Colour"]),
          el("th", {}, ["Level"]),
          el("th", {}, ["Edge labels"]),
          el("th", {}, ["Nodes"]),
          el("th", {}, ["Prior"]),
        ]),
      ]),
    );
    const body = el("tbody");
    for (const row of skeleton.payload.rows) {
      const draft = s.priorDrafts[row.name] ?? (row.prior ? row.prior.join(", ") : "");
      const input = el("input", {
        type: "text",
        class: "prior-input",
        "data-prior-input": row.name,
        value: draft,
        placeholder: row.labels.map(() => "1").join(", "),
      });
      input.addEventListener("input", () => {
        store.state.priorDrafts[row.name] = input.value;
      });
      body.append(
        el("tr", { "data-prior-row": row.name }, [
          el("td", {}, [row.name]),
          el("td", {}, [
            el("span", {
              class: "colour-chip",
              style: `background:${row.colour}`,
              title: row.colour,
            }),
            ` ${row.colour}`,
          ]),
          el("td", {}, [String(row.level)]),
          el("td", {}, [row.labels.join(", ")]),
          el("td", {}, [row.members.join(", ")]),
          el("td", {}, [
            s.priorMode === "custom" ? input : el("span", {}, [joinValues(row.prior)]),
          ]),
        ]),
      );
    }
    table.append(body);
    rowsHost.append(table);

    textHost.append(skeleton.text);
    keyHost.append(skeleton.colour_key);
    finishButton.disabled = !skeleton.complete;
  }

  function redraw(): void {
    loadSkeleton();
    redrawRows();
  }

  store.subscribe(redraw);
  redraw();
}
