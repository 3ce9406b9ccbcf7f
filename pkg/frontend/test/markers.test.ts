import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { badgeFor, Marker, MarkerStore } from "../src/markers.js";

interface Fixture {
  lines: string[];
  markers: Record<string, Marker>;
}

const fixture: Fixture = JSON.parse(
  readFileSync(new URL("./fixtures/event_stream.json", import.meta.url), "utf8"),
);

describe("marker state from a recorded engine session", () => {
  it("replaying the EVT stream reproduces the engine's final marker state", () => {
    const store = new MarkerStore();
    for (const line of fixture.lines) store.apply(line);
    const expected = Object.values(fixture.markers).sort((a, b) => a.id - b.id);
    expect(store.all()).toEqual(expected);
  });

  it("labels carry the entity id and timestamp", () => {
    const store = new MarkerStore();
    for (const line of fixture.lines) store.apply(line);
    for (const marker of store.all()) {
      expect(marker.label).toBe(`#${marker.id} @ ${marker.t}ms`);
    }
  });

  it("the stream exercises all three provenance badges", () => {
    const seen = new Set<string>();
    const store = new MarkerStore();
    for (const line of fixture.lines) {
      const marker = store.apply(line);
      if (marker) seen.add(marker.provenance);
    }
    expect(seen).toContain("sensor");
    expect(seen).toContain("woz");
    expect(seen).toContain("gm");
  });

  it("ignores non-positioned and malformed lines", () => {
    const store = new MarkerStore();
    expect(store.apply("EVT kind=property-change what=3 t=0 tick=0 key=hp value=2")).toBeNull();
    expect(store.apply("PONG seq=1")).toBeNull();
    expect(store.apply("#$# intervene action=teleport")).toBeNull();
    expect(store.apply("garbage")).toBeNull();
    expect(store.all()).toEqual([]);
  });

  it("later fixes replace earlier ones per entity", () => {
    const store = new MarkerStore();
    store.apply("EVT kind=move what=9 t=100 tick=1 lat=10.0 lon=20.0 provenance=sensor");
    store.apply("EVT kind=move what=9 t=200 tick=2 lat=11.0 lon=21.0 provenance=gm");
    expect(store.all()).toHaveLength(1);
    expect(store.get(9)?.lat).toBe(11.0);
    expect(store.get(9)?.provenance).toBe("gm");
  });

  it("badges are distinct per provenance", () => {
    const badges = ["sensor", "woz", "gm", "agent", "rule", "unknown"].map((p) =>
      badgeFor(p as Marker["provenance"]),
    );
    expect(new Set(badges).size).toBe(badges.length);
  });
});
