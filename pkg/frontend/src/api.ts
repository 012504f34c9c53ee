/** Thin fetch wrappers over the service endpoints. */

import type {
  DatasetInfo,
  FieldError,
  Schema,
  SimulateRequestBody,
  SimulateResponse,
} from "./types.js";

/** A 4xx/5xx response, with parsed validation detail when present. */
export class ApiError extends Error {
  readonly status: number;
  readonly fieldErrors: FieldError[];

  constructor(status: number, message: string, fieldErrors: FieldError[] = []) {
    super(message);
    this.status = status;
    this.fieldErrors = fieldErrors;
  }
}

async function throwFrom(res: Response): Promise<never> {
  let detail: unknown = null;
  try {
    detail = (await res.json()).detail;
  } catch {
    /* non-JSON body */
  }
  if (Array.isArray(detail)) {
    const errors = detail as FieldError[];
    const first = errors[0];
    const where = first?.loc?.length ? ` (${first.loc.join(".")})` : "";
    throw new ApiError(res.status, `${first?.msg ?? res.statusText}${where}`, errors);
  }
  const msg = typeof detail === "string" ? detail : res.statusText;
  throw new ApiError(res.status, msg);
}

async function getJson<T>(url: string): Promise<T> {
  const res = await fetch(url);
  if (!res.ok) await throwFrom(res);
  return (await res.json()) as T;
}

export function listDatasets(): Promise<DatasetInfo[]> {
  return getJson<DatasetInfo[]>("/api/datasets");
}

export function getSchema(): Promise<Schema> {
  return getJson<Schema>("/api/schema");
}

export async function simulate(
  body: SimulateRequestBody,
): Promise<SimulateResponse> {
  const res = await fetch("/api/simulate", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) await throwFrom(res);
  return (await res.json()) as SimulateResponse;
}

export function hillshadeTemplate(dataset: string): string {
  return `/api/datasets/${encodeURIComponent(dataset)}/hillshade/{z}/{x}/{y}.png`;
}
