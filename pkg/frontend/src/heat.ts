/**
 * Heat overlay: per-cell fix counts inside a circular region and a time
 * interval. The grid, the great-circle distance and the closed region
 * boundary replicate the server's aggregation exactly, so an overlay drawn
 * from the raw event feed matches the server-computed one cell for cell.
 */

export const EARTH_RADIUS_M = 6_371_000;
export const DEFAULT_CELL_SIZE_DEG = 0.001;

export interface FixEvent {
  what: number;
  lat: number;
  lon: number;
  t: number;
}

export interface Circle {
  lat: number;
  lon: number;
  radiusM: number;
}

const rad = (deg: number): number => (deg * Math.PI) / 180;

export function haversineM(lat1: number, lon1: number, lat2: number, lon2: number): number {
  const phi1 = rad(lat1);
  const phi2 = rad(lat2);
  const dphi = rad(lat2 - lat1);
  const dlam = rad(lon2 - lon1);
  const h =
    Math.sin(dphi / 2) ** 2 + Math.cos(phi1) * Math.cos(phi2) * Math.sin(dlam / 2) ** 2;
  return 2 * EARTH_RADIUS_M * Math.asin(Math.min(1, Math.sqrt(h)));
}

export function cellOf(lat: number, lon: number, cellSize = DEFAULT_CELL_SIZE_DEG): [number, number] {
  return [Math.floor(lat / cellSize), Math.floor(lon / cellSize)];
}

export function cellKey(lat: number, lon: number, cellSize = DEFAULT_CELL_SIZE_DEG): string {
  const [a, b] = cellOf(lat, lon, cellSize);
  return `${a},${b}`;
}

export function heatCounts(
  events: Iterable<FixEvent>,
  region: Circle,
  interval: [number, number],
  cellSize = DEFAULT_CELL_SIZE_DEG,
): Map<string, number> {
  const [t0, t1] = interval;
  const counts = new Map<string, number>();
  for (const event of events) {
    if (event.t < t0 || event.t > t1) continue;
    if (haversineM(region.lat, region.lon, event.lat, event.lon) > region.radiusM) continue;
    const key = cellKey(event.lat, event.lon, cellSize);
    counts.set(key, (counts.get(key) ?? 0) + 1);
  }
  return counts;
}

/** Opacity ramp for a cell, linear in count relative to the hottest cell. */
export function heatOpacity(count: number, maxCount: number): number {
  if (maxCount <= 0) return 0;
  return Math.min(1, count / maxCount);
}
