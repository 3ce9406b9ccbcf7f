/**
 * Intervention forms: typed form state for the staff panel, serialized to
 * the exact control lines the gateway expects. Field order matters — the
 * output must be byte-identical to the server's own rendering so transcripts
 * and replay fixtures line up.
 */

import { formatLine } from "./protocol.js";

/** Form values stay strings: they come from text inputs, and forwarding them
 * verbatim keeps the wire line byte-identical to what the operator typed. */
export type Coord = string | number;

export type InterventionForm =
  | { kind: "teleport"; entity: Coord; lat: Coord; lon: Coord }
  | { kind: "set_property"; entity: Coord; key: string; value: string }
  | { kind: "spawn"; entityKind: string; behavior?: string; lat?: Coord; lon?: Coord }
  | { kind: "despawn"; entity: Coord }
  | { kind: "woz"; entity: Coord; lat: Coord; lon: Coord }
  | { kind: "reconfigure"; rules: string };

export function buildInterventionLine(form: InterventionForm): string {
  switch (form.kind) {
    case "teleport":
      return formatLine(
        "intervene",
        { action: "teleport", entity: form.entity, lat: form.lat, lon: form.lon },
        true,
      );
    case "set_property":
      return formatLine(
        "intervene",
        { action: "set_property", entity: form.entity, key: form.key, value: form.value },
        true,
      );
    case "spawn": {
      const fields: Record<string, Coord> = { action: "spawn", kind: form.entityKind };
      if (form.behavior !== undefined) fields.behavior = form.behavior;
      if (form.lat !== undefined && form.lon !== undefined) {
        fields.lat = form.lat;
        fields.lon = form.lon;
      }
      return formatLine("intervene", fields, true);
    }
    case "despawn":
      return formatLine("intervene", { action: "despawn", entity: form.entity }, true);
    case "woz":
      return formatLine("woz", { entity: form.entity, lat: form.lat, lon: form.lon }, true);
    case "reconfigure":
      return formatLine("reconfigure", { rules: form.rules }, true);
  }
}
