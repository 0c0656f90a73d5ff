// Map view: upload GeoJSON, colour areas by the server-computed conditional
// probability of a chosen outcome, and inspect areas by clicking — either a
// transient reduced CEG for that area, or (while colouring) the area's own
// subtree so its situations can be staged from the map.  Polygon outlines
// reflect the server's per-area colouring status when one is reported.

import { AppContext } from "./app.js";
import { Geometry, MapDocumentFeature, MapFeature, ProbabilityRow } from "./api.js";
import { clear, el, option, svgEl } from "./dom.js";
import { drawCeg } from "./cegview.js";
import { FLORET_COLOURS } from "./treeview.js";

export const PALETTES = [
  "cividis",
  "inferno",
  "magma",
  "mako",
  "plasma",
  "rocket",
  "turbo",
  "viridis",
];

const MAP_WIDTH = 760;
const MAP_HEIGHT = 520;

export function mountMapView(container: HTMLElement, ctx: AppContext): void {
  const { api, store } = ctx;

  let mapFeatures: MapFeature[] | null = null;
  let matchedNames: string[] = [];
  let allNames: string[] = [];
  let documentFeatures: Map<string, MapDocumentFeature> = new Map();
  let probabilityRows: ProbabilityRow[] = [];
  let conditionalEcho: string[] = [];
  let geoRevision = -1;

  const geoText = el("textarea", {
    class: "geo-text",
    "data-testid": "geo-text",
    rows: 5,
    placeholder: "Paste a GeoJSON FeatureCollection here, or choose a file",
  });
  const geoFile = el("input", { type: "file", accept: ".geojson,.json,application/geo+json" });
  geoFile.addEventListener("change", () => {
    const file = geoFile.files?.[0];
    if (file) {
      ctx.track(
        file.text().then((text) => {
          geoText.value = text;
        }),
      );
    }
  });
  const nameProperty = el("input", {
    type: "text",
    value: "name",
    size: 10,
    "data-testid": "name-property",
  });
  const uploadGeo = el("button", { "data-testid": "upload-geo" }, ["Upload GeoJSON"]);
  uploadGeo.addEventListener("click", () => {
    const sid = store.state.sessionId;
    if (!sid || !geoText.value.trim()) return;
    ctx.track(
      api
        .uploadGeo(sid, {
          geojson: geoText.value,
          name_property: nameProperty.value || "name",
          revision: store.state.revision,
        })
        .then((resp) => {
          mapFeatures = resp.map.payload.features;
          matchedNames = resp.map.matched;
          allNames = resp.map.names;
          geoRevision = resp.revision;
          documentFeatures = new Map();
          probabilityRows = [];
          store.applyEnvelope(resp);
        }),
    );
  });

  const matchedInfo = el("p", { class: "matched-info", "data-testid": "matched-info" });

  const colourBy = el("select", { "data-testid": "colour-by" });
  colourBy.addEventListener("change", () => {
    store.state.mapColourBy = colourBy.value;
  });
  const paletteSelect = el("select", { "data-testid": "palette" });
  for (const palette of PALETTES) {
    paletteSelect.append(option(palette, palette, palette === store.state.mapPalette));
  }
  paletteSelect.addEventListener("change", () => {
    store.state.mapPalette = paletteSelect.value;
  });
  const conditionalsHost = el("div", { class: "conditionals-host", "data-testid": "conditionals" });
  const applyMap = el("button", { "data-testid": "apply-map" }, ["Colour map"]);
  applyMap.addEventListener("click", () => {
    const sid = store.state.sessionId;
    const outcome = colourBy.value;
    if (!sid || !outcome) return;
    ctx.track(
      api
        .mapProbabilities(sid, {
          colour_by: outcome,
          conditionals: store.state.mapConditionals,
          palette: paletteSelect.value,
        })
        .then((resp) => {
          documentFeatures = new Map(
            resp.document.features.map((f) => [f.properties.name, f]),
          );
          probabilityRows = resp.probabilities.payload.rows;
          conditionalEcho = resp.probabilities.payload.conditionals;
          store.applyEnvelope(resp);
        }),
    );
  });

  const opacity = el("input", {
    type: "range",
    min: 0,
    max: 1,
    step: 0.05,
    value: String(store.state.mapOpacity),
    "data-testid": "map-opacity",
  });
  opacity.addEventListener("input", () => {
    store.state.mapOpacity = Number(opacity.value);
    for (const path of svgHost.querySelectorAll<SVGElement>("path.area-polygon")) {
      path.setAttribute("fill-opacity", opacity.value);
    }
  });

  const inspectRadio = el("input", {
    type: "radio",
    name: "map-click-mode",
    checked: true,
    "data-testid": "mode-inspect",
  });
  inspectRadio.addEventListener("change", () => {
    if (inspectRadio.checked) store.state.mapClickMode = "inspect";
  });
  const floretRadio = el("input", {
    type: "radio",
    name: "map-click-mode",
    "data-testid": "mode-floret",
  });
  floretRadio.addEventListener("change", () => {
    if (floretRadio.checked) store.state.mapClickMode = "floret";
  });

  const svgHost = el("div", { class: "svg-host map-svg-host" });
  const popupHost = el("div", { class: "popup-host", "data-testid": "map-popup" });
  const probTableHost = el("div", { class: "table-host prob-table-host" });

  container.append(
    el("div", { class: "geo-form" }, [
      el("label", {}, ["GeoJSON file ", geoFile]),
      geoText,
      el("div", { class: "options-row" }, [
        el("label", {}, ["name property ", nameProperty]),
        uploadGeo,
      ]),
    ]),
    matchedInfo,
    el("div", { class: "view-toolbar" }, [
      el("label", {}, ["colour by ", colourBy]),
      el("label", {}, ["palette ", paletteSelect]),
      applyMap,
      el("label", {}, ["opacity ", opacity]),
      el("label", {}, [inspectRadio, " inspect on click"]),
      el("label", {}, [floretRadio, " colour florets on click"]),
    ]),
    conditionalsHost,
    svgHost,
    popupHost,
    probTableHost,
  );

  function outcomeLabels(): string[] {
    const ceg = store.state.render.ceg;
    if (!ceg) return [];
    const labels = new Set<string>();
    for (const edge of ceg.edges) {
      if (edge.target === ceg.sink.id) labels.add(edge.label);
    }
    return [...labels].sort();
  }

  function conditionalGroups(): { heading: string; labels: string[] }[] {
    const ceg = store.state.render.ceg;
    if (!ceg) return [];
    const levelOf = new Map(ceg.positions.map((p) => [p.id, p.level]));
    const byLevel = new Map<number, Set<string>>();
    for (const edge of ceg.edges) {
      const level = levelOf.get(edge.source);
      if (level === undefined || level === 0) continue; // area choices are the map itself
      if (edge.target === ceg.sink.id) continue; // outcomes go in the colour-by picker
      const bucket = byLevel.get(level) ?? new Set<string>();
      bucket.add(edge.label);
      byLevel.set(level, bucket);
    }
    const variableNames = store.state.dataset?.selection ?? [];
    return [...byLevel.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([level, labels]) => ({
        heading: variableNames[level] ?? `level ${level}`,
        labels: [...labels].sort(),
      }));
  }

  function redrawControls(): void {
    const held = store.state.mapColourBy || colourBy.value;
    clear(colourBy);
    colourBy.append(option("", "(pick an outcome)"));
    for (const label of outcomeLabels()) {
      colourBy.append(option(label, label, label === held));
    }

    clear(conditionalsHost);
    const chosen = new Set(store.state.mapConditionals);
    const groups = conditionalGroups();
    if (groups.length > 0) {
      conditionalsHost.append(el("span", { class: "conditionals-title" }, ["Given that:"]));
    }
    for (const group of groups) {
      const groupHost = el("span", { class: "conditional-group" }, [`${group.heading}: `]);
      for (const label of group.labels) {
        const box = el("input", {
          type: "checkbox",
          checked: chosen.has(label),
          "data-conditional": label,
        });
        box.addEventListener("change", () => {
          const current = new Set(store.state.mapConditionals);
          if (box.checked) current.add(label);
          else current.delete(label);
          store.state.mapConditionals = [...current];
        });
        groupHost.append(el("label", { class: "conditional-option" }, [box, ` ${label}`]));
      }
      conditionalsHost.append(groupHost);
    }
  }

  function redrawMap(): void {
    clear(matchedInfo);
    clear(svgHost);
    if (!mapFeatures) {
      svgHost.append(el("p", {}, ["No map yet — upload a GeoJSON FeatureCollection above."]));
      return;
    }
    matchedInfo.append(
      `${matchedNames.length} of ${allNames.length} features matched to areas in the model` +
        (conditionalEcho.length > 0 ? ` — conditioned on ${conditionalEcho.join(", ")}` : ""),
    );

    const project = projector(mapFeatures.map((f) => f.geometry));
    const svg = svgEl("svg", {
      class: "map-svg",
      viewBox: `0 0 ${MAP_WIDTH} ${MAP_HEIGHT}`,
      width: MAP_WIDTH,
      height: MAP_HEIGHT,
    });

    const florets = store.state.render.floret_status ?? {};
    for (const feature of mapFeatures) {
      const doc = documentFeatures.get(feature.name);
      const fill = doc?.properties.fill ?? (feature.matched ? "#ced4da" : "#f1f3f5");
      const floretState = florets[feature.name];
      const path = svgEl("path", {
        class:
          "area-polygon" +
          (feature.matched ? "" : " unmatched") +
          (floretState ? ` floret-${floretState}` : ""),
        "data-area": feature.name,
        d: geometryPath(feature.geometry, project),
        fill,
        "fill-opacity": String(store.state.mapOpacity),
        stroke: floretState ? (FLORET_COLOURS[floretState] ?? "#495057") : "#495057",
        "stroke-width": floretState ? 3 : 1,
        "stroke-dasharray": feature.matched ? "" : "4 3",
      });
      const title = doc?.properties.label ?? feature.name;
      path.append(svgEl("title", {}, [title]));
      path.addEventListener("click", () => onAreaClick(feature.name));
      svg.append(path);
    }
    svgHost.append(svg);
  }

  function redrawProbTable(): void {
    clear(probTableHost);
    if (probabilityRows.length === 0) return;
    const table = el("table", { class: "prob-table", "data-testid": "prob-table" });
    table.append(
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["Area"]),
          el("th", {}, ["Outcome"]),
          el("th", {}, ["Probability"]),
        ]),
      ]),
    );
    const body = el("tbody");
    for (const row of probabilityRows) {
      body.append(
        el("tr", { "data-prob-row": `${row.area}|${row.category}` }, [
          el("td", { "data-field": "area" }, [row.area]),
          el("td", { "data-field": "category" }, [row.category]),
          el("td", { "data-field": "probability" }, [String(row.probability)]),
        ]),
      );
    }
    table.append(body);
    probTableHost.append(table);
  }

  function onAreaClick(name: string): void {
    if (store.state.mapClickMode === "floret") {
      openFloretPopup(name);
      return;
    }
    const sid = store.state.sessionId;
    if (!sid || !store.state.artifacts.ceg) return;
    ctx.track(
      api.reduceCeg(sid, { filter: [name] }).then((resp) => {
        clear(popupHost);
        popupHost.append(
          el("div", { class: "map-popup", "data-popup-area": name }, [
            el("strong", {}, [`Reduced CEG — ${name}`]),
            el("p", {}, [
              `${resp.reduced_render.positions.length} positions, ` +
                `${resp.reduced_render.edges.length} edges after filtering on ${resp.reduced_render.reduced_by.join(", ")}.`,
            ]),
            drawCeg(resp.reduced_render, { levelSeparation: 100 }),
            closeButton(),
          ]),
        );
      }),
    );
  }

  function openFloretPopup(name: string): void {
    const tree = store.state.render.tree;
    if (!tree) return;
    const root = tree.vertices.find((v) => v.level === 0);
    const rootEdge = tree.edges.find((e) => root && e.parent === root.id && e.label === name);
    if (!root || !rootEdge) {
      store.update({ error: `no tree branch found for area ${name}` });
      return;
    }
    const leaves = new Set(tree.vertices.filter((v) => v.is_leaf).map((v) => v.id));
    const childrenOf = new Map<string, string[]>();
    for (const edge of tree.edges) {
      const bucket = childrenOf.get(edge.parent) ?? [];
      bucket.push(edge.child);
      childrenOf.set(edge.parent, bucket);
    }
    const subtree: string[] = [];
    const queue = [rootEdge.child];
    while (queue.length > 0) {
      const id = queue.shift()!;
      if (leaves.has(id)) continue;
      subtree.push(id);
      queue.push(...(childrenOf.get(id) ?? []));
    }

    const boxes: HTMLInputElement[] = [];
    const list = el("div", { class: "floret-node-list" });
    const colours = new Map(tree.vertices.map((v) => [v.id, v.colour]));
    for (const id of subtree) {
      const box = el("input", { type: "checkbox", "data-floret-node": id });
      boxes.push(box);
      list.append(
        el("label", { class: "floret-node" }, [
          box,
          el("span", { class: "colour-chip", style: `background:${colours.get(id) ?? "#fff"}` }),
          ` ${id}`,
        ]),
      );
    }
    const colourInput = el("input", {
      type: "color",
      value: store.state.chosenColour,
      "data-testid": "floret-colour",
    });
    const apply = el("button", { "data-testid": "floret-apply" }, ["Colour selected nodes"]);
    apply.addEventListener("click", () => {
      const sid = store.state.sessionId;
      const picked = boxes.filter((b) => b.checked).map((b) => b.dataset.floretNode!);
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
            clear(popupHost);
          }),
      );
    });

    const status = store.state.render.floret_status?.[name];
    clear(popupHost);
    popupHost.append(
      el("div", { class: "map-popup floret-popup", "data-popup-area": name }, [
        el("strong", {}, [`Colour the ${name} subtree`]),
        status ? el("p", {}, [`Status: ${status}`]) : "",
        list,
        el("div", { class: "options-row" }, [
          el("label", {}, ["colour ", colourInput]),
          apply,
          closeButton(),
        ]),
      ]),
    );
  }

  function closeButton(): HTMLButtonElement {
    const button = el("button", { class: "close-popup" }, ["Close"]);
    button.addEventListener("click", () => clear(popupHost));
    return button;
  }

  function redraw(): void {
    const s = store.state;
    // a new geo upload from elsewhere (archive rehydration) won't be seen here;
    // re-pull the stored map when the revision moved past what we drew
    if (s.artifacts.area_map && mapFeatures === null && s.sessionId && geoRevision !== s.revision) {
      geoRevision = s.revision;
      ctx.track(
        api.getGeo(s.sessionId).then((resp) => {
          mapFeatures = resp.map.payload.features;
          matchedNames = resp.map.matched;
          allNames = resp.map.names;
          redrawMap();
        }),
      );
    }
    uploadGeo.disabled = !s.sessionId;
    applyMap.disabled = !(s.artifacts.ceg && s.artifacts.area_map);
    redrawControls();
    redrawMap();
    redrawProbTable();
  }

  store.subscribe(redraw);
  redraw();
}

type Projector = (lon: number, lat: number) => { x: number; y: number };

function projector(geometries: Geometry[]): Projector {
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const geometry of geometries) {
    for (const [x, y] of ringPoints(geometry)) {
      if (x < minX) minX = x;
      if (x > maxX) maxX = x;
      if (y < minY) minY = y;
      if (y > maxY) maxY = y;
    }
  }
  if (!Number.isFinite(minX)) {
    minX = 0;
    minY = 0;
    maxX = 1;
    maxY = 1;
  }
  const pad = 14;
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min((MAP_WIDTH - 2 * pad) / spanX, (MAP_HEIGHT - 2 * pad) / spanY);
  return (lon, lat) => ({
    x: pad + (lon - minX) * scale,
    y: MAP_HEIGHT - pad - (lat - minY) * scale,
  });
}

function* ringPoints(geometry: Geometry): Generator<[number, number]> {
  const polygons =
    geometry.type === "MultiPolygon"
      ? (geometry.coordinates as number[][][][])
      : [(geometry.coordinates as number[][][]) ?? []];
  for (const polygon of polygons) {
    for (const ring of polygon) {
      for (const point of ring) {
        yield [point[0], point[1]];
      }
    }
  }
}

export function geometryPath(geometry: Geometry, project: Projector): string {
  const polygons =
    geometry.type === "MultiPolygon"
      ? (geometry.coordinates as number[][][][])
      : [(geometry.coordinates as number[][][]) ?? []];
  const parts: string[] = [];
  for (const polygon of polygons) {
    for (const ring of polygon) {
      ring.forEach((point, i) => {
        const { x, y } = project(point[0], point[1]);
        parts.push(`${i === 0 ? "M" : "L"} ${x.toFixed(2)} ${y.toFixed(2)}`);
      });
      parts.push("Z");
    }
  }
  return parts.join(" ");
}
