/**
 * Trajectory traces: ordered position history for one entity, as returned by
 * the server's trajectory query, turned into a polyline for the map layer.
 */

export interface TrajectoryPoint {
  t: number;
  lat: number;
  lon: number;
}

export interface Trace {
  entity: number;
  points: TrajectoryPoint[];
}

/** Normalize a trajectory response: ascending time, duplicates collapsed. */
export function toTrace(entity: number, points: TrajectoryPoint[]): Trace {
  const ordered = [...points].sort((a, b) => a.t - b.t);
  const deduped: TrajectoryPoint[] = [];
  for (const p of ordered) {
    const last = deduped[deduped.length - 1];
    if (last && last.t === p.t && last.lat === p.lat && last.lon === p.lon) continue;
    deduped.push(p);
  }
  return { entity, points: deduped };
}

/** Total path length walked along the trace, in meters. */
export function traceLengthM(
  trace: Trace,
  distance: (lat1: number, lon1: number, lat2: number, lon2: number) => number,
): number {
  let total = 0;
  for (let i = 1; i < trace.points.length; i++) {
    const a = trace.points[i - 1];
    const b = trace.points[i];
    total += distance(a.lat, a.lon, b.lat, b.lon);
  }
  return total;
}

/** Slice a trace to [t0, t1], inclusive on both ends. */
export function clipTrace(trace: Trace, t0: number, t1: number): Trace {
  return { entity: trace.entity, points: trace.points.filter((p) => p.t >= t0 && p.t <= t1) };
}
