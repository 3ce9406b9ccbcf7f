/**
 * Live marker state derived from the EVT stream.
 *
 * Every positioned event (appear/move with a fix) updates one marker per
 * entity; the marker keeps the latest position, a human label with id and
 * timestamp, and a provenance badge so staff can tell sensor-made fixes from
 * synthetic-trigger and direct GM moves at a glance.
 */

import { parseLine } from "./protocol.js";

export type Provenance = "sensor" | "woz" | "gm" | "agent" | "rule" | "unknown";

export interface Marker {
  id: number;
  lat: number;
  lon: number;
  t: number;
  tick: number;
  provenance: Provenance;
  label: string;
}

const BADGES: Record<Provenance, string> = {
  sensor: "●", // filled dot: a real device fix
  woz: "⚙", // gear: synthetic trigger
  gm: "★", // star: direct staff move
  agent: "▸",
  rule: "▪",
  unknown: "?",
};

export function badgeFor(provenance: Provenance): string {
  return BADGES[provenance];
}

export class MarkerStore {
  private markers = new Map<number, Marker>();

  /** Feed one wire line; returns the updated marker, if the line carried a fix. */
  apply(line: string): Marker | null {
    let parsed;
    try {
      parsed = parseLine(line);
    } catch {
      return null;
    }
    const { oob, verb, fields } = parsed;
    if (oob || verb !== "EVT") return null;
    if (fields.kind !== "move" && fields.kind !== "appear") return null;
    if (!("lat" in fields) || !("lon" in fields)) return null;
    const id = Number(fields.what);
    const t = Number(fields.t);
    const marker: Marker = {
      id,
      lat: Number(fields.lat),
      lon: Number(fields.lon),
      t,
      tick: Number(fields.tick),
      provenance: (fields.provenance as Provenance) ?? "unknown",
      label: `#${id} @ ${t}ms`,
    };
    this.markers.set(id, marker);
    return marker;
  }

  get(id: number): Marker | undefined {
    return this.markers.get(id);
  }

  all(): Marker[] {
    return [...this.markers.values()].sort((a, b) => a.id - b.id);
  }

  remove(id: number): void {
    this.markers.delete(id);
  }

  clear(): void {
    this.markers.clear();
  }
}
