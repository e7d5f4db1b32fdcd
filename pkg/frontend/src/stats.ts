/** Presentation helpers for the live statistics panel. */

import { ErrorType, Stats } from "./api.js";

/** Column order of the per-type counters in the stats panel. */
export const TYPE_ORDER: readonly ErrorType[] = ["spawn", "drop", "flip", "shift"];

export function formatPrecision(stats: Stats | null): string {
  if (!stats || stats.reviewed === 0 || stats.precision === null) return "n/a";
  return `${(stats.precision * 100).toFixed(1)}%`;
}

export function progressText(stats: Stats | null, k: number): string {
  return `${stats ? stats.reviewed : 0} / ${k}`;
}

export interface TypeCount {
  type: ErrorType;
  count: number;
}

export function typeCounts(stats: Stats | null): TypeCount[] {
  return TYPE_ORDER.map((type) => ({
    type,
    count: stats ? (stats.per_type[type] ?? 0) : 0,
  }));
}

/** Multi-type verdicts make the per-type total at least the tp count. */
export function typeTotalsConsistent(stats: Stats): boolean {
  const total = TYPE_ORDER.reduce((sum, t) => sum + (stats.per_type[t] ?? 0), 0);
  return total >= stats.counts.tp;
}
