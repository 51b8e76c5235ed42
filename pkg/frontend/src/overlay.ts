// Timing overlay text: the server's per-stage budget next to the round trip.

import type { Timings } from './protocol.js'

export function formatTimings(t: Timings | null, latencyMs: number | null): string {
  if (!t) return 'no frame yet'
  const lat = latencyMs === null ? '-' : `${latencyMs.toFixed(0)} ms`
  return [
    `round trip ${lat}`,
    `bake ${t.bake_ms.toFixed(1)} ms`,
    `raycast ${t.raycast_ms.toFixed(1)} ms`,
    `extractor ${t.extractor_ms.toFixed(1)} ms`,
    `mlp ${t.mlp_ms.toFixed(1)} ms`,
    `total ${t.total_ms.toFixed(1)} ms`,
  ].join('  |  ')
}
