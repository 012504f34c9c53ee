/** Wire types mirroring the service's JSON responses. */

export interface WorldBox {
  min_x: number;
  min_y: number;
  max_x: number;
  max_y: number;
}

export interface DatasetInfo {
  name: string;
  world: WorldBox;
  cellsize: number;
  ncols: number;
  nrows: number;
  z_min: number;
  z_max: number;
  has_release_mask: boolean;
}

/** One parameter's constraints as served by /api/schema. */
export interface ParamSpec {
  type: "float" | "int" | "enum" | "range_deg";
  min?: number;
  max?: number;
  exclusive?: boolean;
  required?: boolean;
  values?: string[];
  default?: number | string | number[] | null;
}

export interface Schema {
  models: {
    avalanche: Record<string, ParamSpec>;
    snow: Record<string, ParamSpec>;
  };
  texture_size_limit: number;
  tile_px: number;
}

export type ModelKind = "avalanche" | "snow";

export interface SimulateRequestBody {
  dataset: string;
  kind: ModelKind;
  seed: number;
  params: Record<string, unknown>;
}

export interface JobStats {
  model_runtime_ms: number;
  particles?: number;
  particle_steps?: number;
  cells_hit?: number;
  z_delta_max_global?: number;
}

export interface NodeReportRow {
  node_id: string;
  op: string;
  status: "EXECUTED" | "CACHE_HIT";
  elapsed_ms: number;
}

export interface OverlayMeta {
  width: number;
  height: number;
  levels: number;
  tile_px: number;
  max_zoom: number;
}

export interface SimulateResponse {
  job_id: string;
  dataset: string;
  kind: ModelKind;
  stats: JobStats;
  report: NodeReportRow[];
  /** Tile URL template with {z}/{x}/{y} placeholders. */
  tiles: string;
  overlay: OverlayMeta;
}

/** Shape of FastAPI validation errors (detail list). */
export interface FieldError {
  loc: (string | number)[];
  msg: string;
  type?: string;
}
