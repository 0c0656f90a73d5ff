// Text formatting for server-provided values.  Numbers are rendered with
// String() so what the user sees is exactly the value the service sent —
// the workbench never rounds, scales, or recomputes model quantities.

export function joinValues(xs: readonly (number | string | null)[] | null | undefined): string {
  if (!xs) return "";
  return xs.map((x) => (x === null ? "—" : String(x))).join(", ");
}

export function edgeValueText(value: number | null | undefined): string {
  return value === null || value === undefined ? "" : String(value);
}

export function shortId(sessionId: string | null): string {
  if (!sessionId) return "—";
  return sessionId.length > 8 ? sessionId.slice(0, 8) + "…" : sessionId;
}

/** Parse a comma-separated numeric draft like "2, 0.5, 1"; null if malformed. */
export function parseVector(text: string): number[] | null {
  const parts = text.split(",").map((p) => p.trim());
  if (parts.length === 0 || parts.some((p) => p === "")) return null;
  const values = parts.map(Number);
  return values.some((v) => !Number.isFinite(v)) ? null : values;
}
