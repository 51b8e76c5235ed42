// Viewer state: orbit camera, timeline position, and display bookkeeping.

import type { Timings } from './protocol.js'

export interface Limits {
  minRadius: number
  maxRadius: number
  minFrame: number // first frame with a complete pose window
  maxFrame: number
}

export interface ViewerState {
  azimuth: number
  elevation: number
  radius: number
  frame: number
  playing: boolean
  playbackFps: number
  lastLatencyMs: number | null
  timings: Timings | null
}

const ELEVATION_MARGIN = 0.02 // keep strictly inside (-pi/2, pi/2)

export function initialState(limits: Limits): ViewerState {
  return {
    azimuth: 0.6,
    elevation: 0.25,
    radius: clampRadius((limits.minRadius + limits.maxRadius) / 2, limits),
    frame: limits.minFrame,
    playing: false,
    playbackFps: 8,
    lastLatencyMs: null,
    timings: null,
  }
}

export function clampRadius(r: number, limits: Limits): number {
  return Math.min(limits.maxRadius, Math.max(limits.minRadius, r))
}

export function clampElevation(e: number): number {
  const lim = Math.PI / 2 - ELEVATION_MARGIN
  return Math.min(lim, Math.max(-lim, e))
}

export function clampFrame(f: number, limits: Limits): number {
  return Math.min(limits.maxFrame, Math.max(limits.minFrame, Math.round(f)))
}

export function applyDrag(s: ViewerState, dxPx: number, dyPx: number, limits: Limits): ViewerState {
  // one canvas width of horizontal drag sweeps roughly a half orbit
  return {
    ...s,
    azimuth: s.azimuth - dxPx * 0.01,
    elevation: clampElevation(s.elevation + dyPx * 0.01),
  }
}

export function applyScroll(s: ViewerState, deltaY: number, limits: Limits): ViewerState {
  const factor = Math.exp(deltaY * 0.001)
  return { ...s, radius: clampRadius(s.radius * factor, limits) }
}

export function scrubTo(s: ViewerState, frame: number, limits: Limits): ViewerState {
  return { ...s, frame: clampFrame(frame, limits) }
}

export function advancePlayback(s: ViewerState, limits: Limits): ViewerState {
  if (!s.playing) return s
  const next = s.frame + 1
  return { ...s, frame: next > limits.maxFrame ? limits.minFrame : next }
}
