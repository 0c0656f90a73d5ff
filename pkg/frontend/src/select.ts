// Select Data tab: choose which columns feed the tree and in what order, mark
// the prediction variable (the server always moves it to the end), and filter
// rows by area subset or time range.

import { AppContext } from "./app.js";
import { clear, el } from "./dom.js";
import { previewTable } from "./upload.js";

export function mountSelect(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  // Working order/checked state survives redraws but resets when the dataset
  // fingerprint changes (new upload or filter).
  let workingOrder: string[] = [];
  let checked = new Set<string>();
  let prediction: string | null = null;
  let seenFingerprint = "";

  const columnsHost = el("div", { class: "columns-host" });
  const applyButton = el("button", { "data-testid": "apply-selection" }, ["Apply selection"]);
  const selectionInfo = el("p", { class: "selection-info", "data-testid": "selection-info" });
  const filterHost = el("div", { class: "filter-host" });
  const previewHost = el("div", { class: "preview-host" });

  applyButton.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid) return;
    const columns = workingOrder.filter((name) => checked.has(name));
    if (columns.length === 0) {
      store.update({ error: "tick at least one column" });
      return;
    }
    ctx.track(
      api
        .selectColumns(sid, {
          columns,
          prediction_variable: prediction ?? undefined,
          revision: store.state.revision,
        })
        .then((resp) => {
          store.applyEnvelope(resp);
          store.update({ dataset: resp.dataset });
        }),
    );
  });

  container.append(
    el("h2", {}, ["Select Data"]),
    el("p", {}, [
      "Tick the columns for the event tree, order them with the arrows, and pick the prediction variable — it always becomes the final tree variable.",
    ]),
    columnsHost,
    applyButton,
    selectionInfo,
    el("h3", {}, ["Filter rows"]),
    filterHost,
    previewHost,
  );

  function syncWorkingState(): void {
    const data = store.state.dataset;
    if (!data) {
      workingOrder = [];
      checked = new Set();
      prediction = null;
      seenFingerprint = "";
      return;
    }
    if (data.fingerprint === seenFingerprint) return;
    seenFingerprint = data.fingerprint;
    workingOrder = [...data.column_names];
    const selection = data.selection;
    checked = new Set(selection ?? data.column_names);
    prediction = selection && selection.length > 0 ? selection[selection.length - 1] : null;
    if (selection) {
      // keep previously selected columns in their chosen order, rest after
      const rest = data.column_names.filter((c) => !selection.includes(c));
      workingOrder = [...selection, ...rest];
    }
  }

  function redraw(): void {
    syncWorkingState();
    const data = store.state.dataset;
    clear(columnsHost);
    clear(selectionInfo);
    clear(filterHost);
    clear(previewHost);
    if (!data) {
      columnsHost.append(el("p", {}, ["Upload a dataset first."]));
      return;
    }

    const list = el("ul", { class: "column-list" });
    workingOrder.forEach((name, index) => {
      const checkbox = el("input", {
        type: "checkbox",
        checked: checked.has(name),
        "data-column": name,
        onchange: () => {
          if (checkbox.checked) checked.add(name);
          else checked.delete(name);
        },
      });
      const radio = el("input", {
        type: "radio",
        name: "prediction-variable",
        checked: prediction === name,
        "data-prediction": name,
        onchange: () => {
          prediction = name;
        },
      });
      const up = el("button", { class: "move-up", "data-move-up": name, title: "move up" }, ["↑"]);
      up.addEventListener("click", () => {
        if (index > 0) {
          workingOrder.splice(index, 1);
          workingOrder.splice(index - 1, 0, name);
          redraw();
        }
      });
      const down = el("button", { class: "move-down", "data-move-down": name, title: "move down" }, ["↓"]);
      down.addEventListener("click", () => {
        if (index < workingOrder.length - 1) {
          workingOrder.splice(index, 1);
          workingOrder.splice(index + 1, 0, name);
          redraw();
        }
      });
      list.append(
        el("li", { class: "column-row" }, [
          checkbox,
          el("span", { class: "column-name" }, [name]),
          el("label", { class: "prediction-pick" }, [radio, " prediction"]),
          up,
          down,
        ]),
      );
    });
    columnsHost.append(list);

    if (data.selection) {
      selectionInfo.append(`Tree variables (in order): ${data.selection.join(" → ")}`);
    } else {
      selectionInfo.append("No selection applied yet — all columns in file order.");
    }

    drawFilters(data.area_column, data.time_column, data.levels);
    previewHost.append(
      previewTable(
        data.selection ?? data.column_names,
        projectPreview(data.column_names, data.preview, data.selection),
        data.selection ? data.selection[data.selection.length - 1] : prediction,
      ),
    );
  }

  function projectPreview(
    columns: string[],
    preview: string[][],
    selection: string[] | null,
  ): string[][] {
    if (!selection) return preview;
    const indices = selection.map((name) => columns.indexOf(name));
    // when the preview already reflects the selection, widths match
    if (preview.length > 0 && preview[0].length === selection.length) return preview;
    return preview.map((row) => indices.map((i) => row[i] ?? ""));
  }

  function drawFilters(
    areaColumn: string | null,
    timeColumn: string | null,
    levels: Record<string, string[]>,
  ): void {
    if (!areaColumn && !timeColumn) {
      filterHost.append(
        el("p", {}, ["Designate an area or time column on the Upload tab to enable row filters."]),
      );
      return;
    }

    const areaBoxes: HTMLInputElement[] = [];
    if (areaColumn) {
      const areaList = el("div", { class: "area-filter" });
      for (const value of levels[areaColumn] ?? []) {
        const box = el("input", { type: "checkbox", checked: true, "data-area": value });
        areaBoxes.push(box);
        areaList.append(el("label", { class: "area-option" }, [box, ` ${value}`]));
      }
      filterHost.append(el("p", {}, [`Areas (${areaColumn}):`]), areaList);
    }

    let fromInput: HTMLInputElement | null = null;
    let toInput: HTMLInputElement | null = null;
    if (timeColumn) {
      fromInput = el("input", { type: "text", placeholder: "from (e.g. 2007-01-01)" });
      toInput = el("input", { type: "text", placeholder: "to (e.g. 2010-12-31)" });
      filterHost.append(
        el("p", {}, [`Time range (${timeColumn}):`]),
        el("div", { class: "time-filter" }, [fromInput, " – ", toInput]),
      );
    }

    const applyFilter = el("button", { "data-testid": "apply-filter" }, ["Apply filter"]);
    applyFilter.addEventListener("click", () => {
      const sid = store.state.sessionId;
      if (!sid) return;
      const body: Parameters<typeof api.filterRows>[1] = { revision: store.state.revision };
      if (areaColumn) {
        const kept = areaBoxes.filter((b) => b.checked).map((b) => b.dataset.area!);
        if (kept.length < areaBoxes.length) body.area_subset = kept;
      }
      if (fromInput && toInput && fromInput.value && toInput.value) {
        body.time_range = [fromInput.value, toInput.value];
      }
      ctx.track(
        api.filterRows(sid, body).then((resp) => {
          store.applyEnvelope(resp);
          store.update({ dataset: resp.dataset });
        }),
      );
    });
    filterHost.append(applyFilter);
  }

  store.subscribe(redraw);
  redraw();
}
