/** Boot: load datasets + schema, build the parameter panel, wire the
 * debounced steering loop, and keep the tile layers in sync. */

import { ApiError, getSchema, hillshadeTemplate, listDatasets, simulate } from "./api.js";
import { SimulateScheduler } from "./scheduler.js";
import { Store, initialState, simulateBody } from "./state.js";
import { TileMap, maxZoomFor } from "./tilemap.js";
import type {
  DatasetInfo,
  ModelKind,
  ParamSpec,
  SimulateRequestBody,
  SimulateResponse,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function mount(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function labelFor(field: string): string {
  return field.replace(/_/g, " ");
}

async function boot(): Promise<void> {
  const [datasets, schema] = await Promise.all([listDatasets(), getSchema()]);
  if (datasets.length === 0) {
    mount("panel").textContent = "no datasets served — start with --data-dir";
    return;
  }

  const store = new Store(initialState(schema, datasets[0].name));
  const map = new TileMap(mount("map"), schema.tile_px);
  const banner = mount("banner");
  const statsBox = mount("stats");
  let lastRun: { body: SimulateRequestBody; res: SimulateResponse } | null = null;

  const currentDataset = (): DatasetInfo =>
    datasets.find((d) => d.name === store.get().dataset) ?? datasets[0];

  const showBase = (): void => {
    const ds = currentDataset();
    map.setBase(
      hillshadeTemplate(ds.name),
      maxZoomFor(Math.max(ds.ncols, ds.nrows), schema.tile_px),
    );
  };

  const onOverlayTileError = (): void => {
    if (store.get().jobId !== null) store.update({ staleJob: true });
  };

  const scheduler = new SimulateScheduler<SimulateRequestBody, SimulateResponse>({
    request: (body) => simulate(body),
    onLaunch: () => store.update({ inFlight: true }),
    onResult: (body, res) => {
      lastRun = { body, res };
      store.update({
        inFlight: false,
        jobId: res.job_id,
        tilesTemplate: res.tiles,
        overlayMaxZoom: res.overlay.max_zoom,
        staleJob: false,
        networkError: null,
        fieldError: null,
      });
      map.setOverlay(res.tiles, res.overlay.max_zoom, onOverlayTileError);
    },
    onError: (_body, err) => {
      if (err instanceof ApiError && err.status === 422 && err.fieldErrors.length) {
        const loc = err.fieldErrors[0].loc;
        const field = String(loc[loc.length - 1]);
        store.update({
          inFlight: false,
          fieldError: { field, message: err.fieldErrors[0].msg },
        });
      } else {
        store.update({ inFlight: false, networkError: String(err) });
      }
    },
  });

  const run = (immediate = false): void => {
    const state = store.get();
    if (state.kind === "snow" && state.params.snow.snow_line_m === null) {
      store.update({
        fieldError: { field: "snow_line_m", message: "snow line is required" },
      });
      return;
    }
    const body = simulateBody(state);
    if (immediate) scheduler.flushNow(body);
    else scheduler.schedule(body);
  };

  // ---- dataset picker -------------------------------------------------
  const datasetSelect = el("select");
  for (const d of datasets) {
    const opt = el("option", undefined, `${d.name} (${d.ncols}x${d.nrows})`);
    opt.value = d.name;
    datasetSelect.appendChild(opt);
  }
  datasetSelect.onchange = () => {
    store.update({ dataset: datasetSelect.value, jobId: null, staleJob: false });
    seedSnowLine();
    map.setOverlay(null, 0);
    showBase();
  };
  const datasetRow = el("div", "row");
  datasetRow.appendChild(el("label", undefined, "dataset"));
  datasetRow.appendChild(datasetSelect);
  mount("dataset-section").appendChild(datasetRow);

  // ---- model tabs -----------------------------------------------------
  const tabs: Record<ModelKind, HTMLButtonElement> = {
    avalanche: el("button", "tab active", "avalanche"),
    snow: el("button", "tab", "snow"),
  };
  for (const kind of ["avalanche", "snow"] as ModelKind[]) {
    tabs[kind].onclick = () => {
      if (store.get().kind === kind) return;
      store.update({ kind });
      tabs.avalanche.classList.toggle("active", kind === "avalanche");
      tabs.snow.classList.toggle("active", kind === "snow");
      buildParamControls();
      run();
    };
    mount("model-tabs").appendChild(tabs[kind]);
  }

  // ---- parameter controls --------------------------------------------
  const paramsBox = mount("params");

  function numberInput(
    kind: ModelKind,
    field: string,
    spec: ParamSpec,
    value: number | null,
  ): HTMLInputElement {
    const input = el("input");
    input.type = "number";
    if (spec.min !== undefined) input.min = String(spec.min);
    if (spec.max !== undefined) input.max = String(spec.max);
    input.step = spec.type === "int" ? "1" : "any";
    input.value = value === null ? "" : String(value);
    if (spec.required && value === null) input.placeholder = "required";
    input.onchange = () => {
      const ok = store.setParam(schema, kind, field, Number(input.value));
      input.classList.toggle("invalid", !ok);
      if (ok) run();
    };
    return input;
  }

  function sliderInput(
    kind: ModelKind,
    field: string,
    spec: ParamSpec,
    value: number,
  ): HTMLElement {
    const wrap = el("div", "slider");
    const input = el("input");
    input.type = "range";
    const span = (spec.max as number) - (spec.min as number);
    const step = span <= 1 ? 0.01 : span <= 100 ? 0.5 : 1;
    const lo = spec.exclusive ? (spec.min as number) + step : (spec.min as number);
    const hi = spec.exclusive ? (spec.max as number) - step : (spec.max as number);
    input.min = String(lo);
    input.max = String(hi);
    input.step = String(step);
    input.value = String(value);
    const readout = el("span", "readout", String(value));
    input.oninput = () => {
      if (store.setParam(schema, kind, field, Number(input.value))) {
        readout.textContent = input.value;
        run();
      }
    };
    wrap.appendChild(input);
    wrap.appendChild(readout);
    return wrap;
  }

  function buildParamControls(): void {
    paramsBox.textContent = "";
    const kind = store.get().kind;
    const specs = schema.models[kind];
    for (const [field, spec] of Object.entries(specs)) {
      const row = el("div", "row");
      row.dataset.field = field;
      row.appendChild(el("label", undefined, labelFor(field)));
      const value = store.get().params[kind][field];
      if (spec.type === "enum") {
        const select = el("select");
        for (const v of spec.values ?? []) {
          const opt = el("option", undefined, v);
          opt.value = v;
          select.appendChild(opt);
        }
        select.value = String(value);
        select.onchange = () => {
          if (store.setParam(schema, kind, field, select.value)) run();
        };
        row.appendChild(select);
      } else if (spec.type === "range_deg") {
        const [lo, hi] = (value as number[]) ?? [0, 0];
        const loIn = el("input");
        const hiIn = el("input");
        for (const [input, v] of [
          [loIn, lo],
          [hiIn, hi],
        ] as const) {
          input.type = "number";
          input.step = "any";
          input.value = String(v);
        }
        const apply = () => {
          const ok = store.setParam(schema, kind, field, [
            Number(loIn.value),
            Number(hiIn.value),
          ]);
          loIn.classList.toggle("invalid", !ok);
          hiIn.classList.toggle("invalid", !ok);
          if (ok) run();
        };
        loIn.onchange = apply;
        hiIn.onchange = apply;
        const pair = el("div", "pair");
        pair.appendChild(loIn);
        pair.appendChild(hiIn);
        row.appendChild(pair);
      } else if (
        spec.type === "float" &&
        spec.min !== undefined &&
        spec.max !== undefined
      ) {
        row.appendChild(sliderInput(kind, field, spec, value as number));
      } else {
        row.appendChild(numberInput(kind, field, spec, value as number | null));
      }
      const err = el("div", "field-error");
      row.appendChild(err);
      paramsBox.appendChild(row);
    }
  }

  function seedSnowLine(): void {
    if (store.get().params.snow.snow_line_m !== null) return;
    const ds = currentDataset();
    store.setParam(schema, "snow", "snow_line_m", Math.round((ds.z_min + ds.z_max) / 2));
  }

  // ---- run controls ---------------------------------------------------
  const runControls = mount("run-controls");
  const seedRow = el("div", "row");
  seedRow.appendChild(el("label", undefined, "seed"));
  const seedInput = el("input");
  seedInput.type = "number";
  seedInput.step = "1";
  seedInput.value = "0";
  seedInput.onchange = () => {
    const v = Math.round(Number(seedInput.value));
    if (!Number.isFinite(v)) {
      seedInput.classList.add("invalid");
      return;
    }
    seedInput.classList.remove("invalid");
    store.update({ seed: v });
    run();
  };
  seedRow.appendChild(seedInput);
  runControls.appendChild(seedRow);

  const opacityRow = el("div", "row");
  opacityRow.appendChild(el("label", undefined, "overlay opacity"));
  const opacityInput = el("input");
  opacityInput.type = "range";
  opacityInput.min = "0";
  opacityInput.max = "1";
  opacityInput.step = "0.05";
  opacityInput.value = "0.85";
  opacityInput.oninput = () => map.setOverlayOpacity(Number(opacityInput.value));
  map.setOverlayOpacity(0.85);
  opacityRow.appendChild(opacityInput);
  runControls.appendChild(opacityRow);

  const runButton = el("button", "run", "run simulation");
  runButton.onclick = () => run(true);
  runControls.appendChild(runButton);

  const zoomRow = el("div", "row zoombar");
  const zoomOut = el("button", undefined, "−");
  const zoomIn = el("button", undefined, "+");
  zoomOut.onclick = () => map.zoomOut();
  zoomIn.onclick = () => map.zoomIn();
  zoomRow.appendChild(el("label", undefined, "zoom"));
  zoomRow.appendChild(zoomOut);
  zoomRow.appendChild(zoomIn);
  runControls.appendChild(zoomRow);

  // ---- reactions -------------------------------------------------------
  function renderStats(): void {
    statsBox.textContent = "";
    statsBox.classList.toggle("stale", store.get().staleJob);
    if (!lastRun) {
      statsBox.appendChild(el("p", "hint", "no run yet — adjust a parameter"));
      return;
    }
    const { body, res } = lastRun;
    const rows: Array<[string, string]> = [
      ["model runtime", `${res.stats.model_runtime_ms.toFixed(1)} ms`],
      ["seed", String(body.seed)],
    ];
    if (res.kind === "avalanche") {
      rows.push(["particles", String(res.stats.particles ?? 0)]);
      rows.push(["cells hit", String(res.stats.cells_hit ?? 0)]);
      rows.push([
        "max z-delta",
        `${(res.stats.z_delta_max_global ?? 0).toFixed(2)} m`,
      ]);
    }
    const cached = res.report.filter((r) => r.status === "CACHE_HIT").length;
    rows.push(["graph nodes", `${res.report.length} (${cached} cached)`]);
    for (const [k, v] of rows) {
      const row = el("div", "stat");
      row.appendChild(el("span", "k", k));
      row.appendChild(el("span", "v", v));
      statsBox.appendChild(row);
    }
  }

  function renderBanner(): void {
    banner.textContent = "";
    const s = store.get();
    const add = (cls: string, msg: string, action?: [string, () => void]) => {
      const box = el("div", `notice ${cls}`);
      box.appendChild(el("span", undefined, msg));
      if (action) {
        const btn = el("button", undefined, action[0]);
        btn.onclick = action[1];
        box.appendChild(btn);
      }
      banner.appendChild(box);
    };
    if (s.staleJob)
      add("warn", "overlay job is no longer available", ["re-run", () => run(true)]);
    if (s.networkError)
      add("error", `request failed: ${s.networkError}`, ["retry", () => run(true)]);
    if (s.fieldError) add("error", `${labelFor(s.fieldError.field)}: ${s.fieldError.message}`);
  }

  store.subscribe((s) => {
    document.body.classList.toggle("busy", s.inFlight);
    for (const row of paramsBox.querySelectorAll<HTMLElement>(".row")) {
      const isBad = s.fieldError !== null && row.dataset.field === s.fieldError.field;
      row.classList.toggle("has-error", isBad);
      const slot = row.querySelector(".field-error");
      if (slot) slot.textContent = isBad ? s.fieldError!.message : "";
    }
    renderStats();
    renderBanner();
  });

  seedSnowLine();
  buildParamControls();
  showBase();
  renderStats();
  window.addEventListener("resize", () => map.render());
}

boot().catch((err) => {
  mount("panel").textContent = `failed to load: ${err}`;
});
