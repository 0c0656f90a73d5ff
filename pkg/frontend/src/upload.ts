// Upload Data tab: paste or pick a CSV, set parsing options and the optional
// area/time designations, and preview the parsed table.  Re-uploading replaces
// the dataset server-side (which clears everything downstream), so local
// colouring and prior drafts are reset here too.

import { AppContext } from "./app.js";
import { clear, el, option } from "./dom.js";

export function mountUpload(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  const csvText = el("textarea", {
    class: "csv-text",
    "data-testid": "csv-text",
    rows: 8,
    placeholder: "Paste CSV content here, or choose a file below",
  });
  const fileInput = el("input", { type: "file", accept: ".csv,text/csv" });
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (file) {
      ctx.track(
        file.text().then((text) => {
          csvText.value = text;
        }),
      );
    }
  });

  const headerBox = el("input", { type: "checkbox", checked: true, "data-testid": "opt-header" });
  const separator = el("input", { type: "text", value: ",", size: 2, "data-testid": "opt-separator" });
  const quote = el("input", { type: "text", value: '"', size: 2, "data-testid": "opt-quote" });
  const excludeFirst = el("input", { type: "checkbox", "data-testid": "opt-exclude-first" });
  const previewRows = el("input", { type: "number", value: "10", min: 0, max: 1000, size: 4 });

  const areaSelect = el("select", { "data-testid": "area-column" }, [option("", "(no area column)")]);
  const timeSelect = el("select", { "data-testid": "time-column" }, [option("", "(no time column)")]);
  const timeGranularity = el("select", {}, [
    option("date"),
    option("month"),
    option("year"),
  ]);
  const timeFormat = el("input", { type: "text", value: "%Y-%m-%d", size: 10 });

  const uploadButton = el("button", { "data-testid": "upload-btn" }, ["Upload"]);
  const info = el("p", { class: "dataset-info", "data-testid": "dataset-info" });
  const previewHost = el("div", { class: "preview-host" });

  uploadButton.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid) return;
    if (!csvText.value.trim()) {
      store.update({ error: "paste CSV text or choose a file first" });
      return;
    }
    const body: Parameters<typeof api.uploadDataset>[1] = {
      csv_text: csvText.value,
      header: headerBox.checked,
      separator: separator.value || ",",
      quote: quote.value || '"',
      exclude_first_column: excludeFirst.checked,
      preview: Number(previewRows.value) || 10,
      revision: store.state.revision,
    };
    if (areaSelect.value) body.area_column = areaSelect.value;
    if (timeSelect.value) {
      body.time_column = timeSelect.value;
      body.time_granularity = timeGranularity.value;
      body.time_format = timeFormat.value;
    }
    ctx.track(
      api.uploadDataset(sid, body).then((resp) => {
        store.applyEnvelope(resp);
        store.update({
          dataset: resp.dataset,
          selectedNodes: [],
          priorDrafts: {},
          cegOffsets: {},
          selectedCegNode: null,
          mapColourBy: "",
          mapConditionals: [],
        });
      }),
    );
  });

  container.append(
    el("h2", {}, ["Upload Data"]),
    el("div", { class: "upload-form" }, [
      el("label", { class: "field" }, ["CSV file ", fileInput]),
      csvText,
      el("div", { class: "options-row" }, [
        el("label", {}, [headerBox, " first row is a header"]),
        el("label", {}, ["separator ", separator]),
        el("label", {}, ["quote ", quote]),
        el("label", {}, [excludeFirst, " drop first column (row ids)"]),
        el("label", {}, ["preview rows ", previewRows]),
      ]),
      el("div", { class: "options-row" }, [
        el("label", {}, ["area column ", areaSelect]),
        el("label", {}, ["time column ", timeSelect]),
        el("label", {}, ["granularity ", timeGranularity]),
        el("label", {}, ["format ", timeFormat]),
      ]),
      uploadButton,
    ]),
    info,
    previewHost,
  );

  function redraw(): void {
    const data = store.state.dataset;
    clear(info);
    clear(previewHost);
    if (!data) {
      info.append("No dataset uploaded yet.");
      return;
    }

    info.append(
      `${data.n_rows} rows, ${data.column_names.length} columns` +
        (data.area_column ? ` — area column: ${data.area_column}` : "") +
        (data.time_column ? ` — time column: ${data.time_column}` : ""),
    );

    repopulate(areaSelect, data.column_names, data.area_column ?? "", "(no area column)");
    repopulate(timeSelect, data.column_names, data.time_column ?? "", "(no time column)");

    previewHost.append(previewTable(data.column_names, data.preview, predictionColumn()));
  }

  function predictionColumn(): string | null {
    const selection = store.state.dataset?.selection;
    return selection && selection.length > 0 ? selection[selection.length - 1] : null;
  }

  store.subscribe(redraw);
  redraw();
}

function repopulate(
  select: HTMLSelectElement,
  names: string[],
  current: string,
  emptyLabel: string,
): void {
  // an explicit user choice (even "none") wins over the server's designation
  const held = select.dataset.touched ? select.value : select.value || current;
  if (!select.dataset.wired) {
    select.dataset.wired = "1";
    select.addEventListener("change", () => {
      select.dataset.touched = "1";
    });
  }
  clear(select);
  select.append(option("", emptyLabel));
  for (const name of names) {
    select.append(option(name, name, name === held));
  }
}

export function previewTable(
  columns: string[],
  rows: string[][],
  highlight: string | null,
): HTMLTableElement {
  const table = el("table", { class: "preview-table" });
  const head = el("tr");
  for (const name of columns) {
    head.append(
      el("th", { class: name === highlight ? "prediction-column" : "" }, [name]),
    );
  }
  table.append(el("thead", {}, [head]));
  const body = el("tbody");
  for (const row of rows) {
    const tr = el("tr");
    row.forEach((cell, i) => {
      tr.append(
        el("td", { class: columns[i] === highlight ? "prediction-column" : "" }, [cell]),
      );
    });
    body.append(tr);
  }
  table.append(body);
  return table;
}
