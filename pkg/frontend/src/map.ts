/**
 * Canvas map layer: equirectangular projection of markers, trace polylines
 * and the heat overlay. Drawing goes through a minimal 2D-context interface
 * so the layer is testable without a DOM.
 */

import { badgeFor, Marker } from "./markers.js";
import { heatOpacity } from "./heat.js";
import { Trace } from "./trace.js";

export interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

/** The slice of CanvasRenderingContext2D the map layer actually uses. */
export interface Draw2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, start: number, end: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export class MapView {
  constructor(
    public bounds: Bounds,
    public width: number,
    public height: number,
  ) {}

  /** Equirectangular: x linear in longitude, y linear in latitude, y-down. */
  project(lat: number, lon: number): { x: number; y: number } {
    const { minLat, maxLat, minLon, maxLon } = this.bounds;
    const x = ((lon - minLon) / (maxLon - minLon)) * this.width;
    const y = ((maxLat - lat) / (maxLat - minLat)) * this.height;
    return { x, y };
  }

  drawMarkers(ctx: Draw2D, markers: Marker[]): void {
    for (const marker of markers) {
      const { x, y } = this.project(marker.lat, marker.lon);
      ctx.fillStyle = marker.provenance === "sensor" ? "#2b6cb0" : "#c05621";
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.font = "12px sans-serif";
      ctx.fillText(`${badgeFor(marker.provenance)} ${marker.label}`, x + 8, y - 8);
    }
  }

  drawTrace(ctx: Draw2D, trace: Trace): void {
    if (trace.points.length < 2) return;
    ctx.strokeStyle = "#2f855a";
    ctx.lineWidth = 2;
    ctx.beginPath();
    trace.points.forEach((p, i) => {
      const { x, y } = this.project(p.lat, p.lon);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }

  drawHeat(ctx: Draw2D, counts: Map<string, number>, cellSizeDeg: number): void {
    const max = Math.max(0, ...counts.values());
    for (const [key, count] of counts) {
      const [cellLat, cellLon] = key.split(",").map(Number);
      const top = this.project((cellLat + 1) * cellSizeDeg, cellLon * cellSizeDeg);
      const bottom = this.project(cellLat * cellSizeDeg, (cellLon + 1) * cellSizeDeg);
      const alpha = heatOpacity(count, max);
      ctx.fillStyle = `rgba(221, 44, 44, ${alpha.toFixed(3)})`;
      ctx.fillRect(top.x, top.y, bottom.x - top.x, bottom.y - top.y);
    }
  }
}
