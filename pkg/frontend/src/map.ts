import type { GeoPoint } from "./types.js";

export interface PlacedPoint {
  x: number;
  y: number;
}

/**
 * Plain linear projection of fleet coordinates onto an abstract canvas.
 *
 * No map tiles: the fleet's bounding box is stretched to the drawable area
 * minus padding, latitude inverted so north is up. A degenerate box (single
 * lamppost, or a perfectly straight row) centers on the flat axis.
 */
export function projectPoints(
  points: GeoPoint[],
  width: number,
  height: number,
  padding: number,
): PlacedPoint[] {
  if (points.length === 0) return [];
  const lats = points.map((p) => p.lat);
  const lons = points.map((p) => p.lon);
  const latMin = Math.min(...lats);
  const latMax = Math.max(...lats);
  const lonMin = Math.min(...lons);
  const lonMax = Math.max(...lons);
  const drawW = Math.max(width - 2 * padding, 1);
  const drawH = Math.max(height - 2 * padding, 1);
  const lonSpan = lonMax - lonMin;
  const latSpan = latMax - latMin;
  return points.map((p) => ({
    x: padding + (lonSpan === 0 ? drawW / 2 : ((p.lon - lonMin) / lonSpan) * drawW),
    y: padding + (latSpan === 0 ? drawH / 2 : ((latMax - p.lat) / latSpan) * drawH),
  }));
}
