/** UI state: one plain object, updated through a tiny observable
 * store. Parameter writes are validated against the served schema, so
 * anything the service would 422 is blocked before a request exists.
 */

import type {
  ModelKind,
  ParamSpec,
  Schema,
  SimulateRequestBody,
} from "./types.js";

export type ParamValues = Record<string, number | string | number[] | null>;

export interface UiState {
  dataset: string;
  kind: ModelKind;
  params: { avalanche: ParamValues; snow: ParamValues };
  seed: number;
  /** Most recent successful job; overlay tiles always point here. */
  jobId: string | null;
  tilesTemplate: string | null;
  overlayMaxZoom: number;
  inFlight: boolean;
  /** Active job vanished server-side (tile 404/410). */
  staleJob: boolean;
  /** Inline message for the offending parameter field, if any. */
  fieldError: { field: string; message: string } | null;
  /** Transport-level failure awaiting a retry. */
  networkError: string | null;
}

/** Build a model's initial parameter values from schema defaults. */
export function defaultsFrom(specs: Record<string, ParamSpec>): ParamValues {
  const out: ParamValues = {};
  for (const [name, spec] of Object.entries(specs)) {
    if (spec.default !== undefined) out[name] = spec.default;
    else if (spec.required) out[name] = null; // must be filled in before use
  }
  return out;
}

/** Validate + normalize one field edit. Returns the stored value, or
 * null when the edit is invalid and must not reach the service. */
export function normalizeParam(
  spec: ParamSpec,
  raw: number | string | number[],
): number | string | number[] | null {
  if (spec.type === "enum") {
    return typeof raw === "string" && spec.values?.includes(raw) ? raw : null;
  }
  if (spec.type === "range_deg") {
    if (!Array.isArray(raw) || raw.length !== 2) return null;
    const [lo, hi] = raw.map(Number);
    if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo > hi) return null;
    const min = spec.min ?? -Infinity;
    const max = spec.max ?? Infinity;
    if (lo < min || hi > max) return null;
    return [lo, hi];
  }
  let v = typeof raw === "number" ? raw : Number(raw);
  if (!Number.isFinite(v)) return null;
  if (spec.type === "int") v = Math.round(v);
  const min = spec.min ?? -Infinity;
  const max = spec.max ?? Infinity;
  if (spec.exclusive) {
    if (v <= min || v >= max) return null; // open interval: no clamp target
  } else {
    v = Math.min(Math.max(v, min), max);
  }
  return v;
}

/** The POST /api/simulate body for the current state. Fields whose
 * value is null (unset optionals) are omitted. */
export function simulateBody(state: UiState): SimulateRequestBody {
  const source = state.params[state.kind];
  const params: Record<string, unknown> = {};
  for (const [k, v] of Object.entries(source)) {
    if (v !== null) params[k] = v;
  }
  return { dataset: state.dataset, kind: state.kind, seed: state.seed, params };
}

export class Store {
  private state: UiState;
  private listeners: Array<(s: UiState) => void> = [];

  constructor(initial: UiState) {
    this.state = initial;
  }

  get(): UiState {
    return this.state;
  }

  update(patch: Partial<UiState>): UiState {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
    return this.state;
  }

  /** Apply a parameter edit; returns false (and changes nothing) when
   * the value is out of range or malformed. */
  setParam(
    schema: Schema,
    kind: ModelKind,
    field: string,
    raw: number | string | number[],
  ): boolean {
    const spec = schema.models[kind][field];
    if (!spec) return false;
    const value = normalizeParam(spec, raw);
    if (value === null) return false;
    const params = {
      ...this.state.params,
      [kind]: { ...this.state.params[kind], [field]: value },
    };
    this.update({ params, fieldError: null });
    return true;
  }

  subscribe(fn: (s: UiState) => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }
}

export function initialState(schema: Schema, dataset: string): UiState {
  return {
    dataset,
    kind: "avalanche",
    params: {
      avalanche: defaultsFrom(schema.models.avalanche),
      snow: defaultsFrom(schema.models.snow),
    },
    seed: 0,
    jobId: null,
    tilesTemplate: null,
    overlayMaxZoom: 0,
    inFlight: false,
    staleJob: false,
    fieldError: null,
    networkError: null,
  };
}
