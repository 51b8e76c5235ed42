// Wire types for the render service websocket protocol.

export interface OrbitCamera {
  azimuth: number
  elevation: number
  radius: number
  look_at?: [number, number, number]
}

export interface RenderRequest {
  request_id: number
  pose: { frame: number } | { joint_rotations: number[][]; root_translation?: number[] }
  camera: { orbit: OrbitCamera } | { full: Record<string, unknown> }
  resolution?: number
}

export interface Timings {
  bake_ms: number
  raycast_ms: number
  extractor_ms: number
  mlp_ms: number
  total_ms: number
}

export interface FrameHeader {
  request_id: number
  frame: number
  timings: Timings
  foreground_pixels: number
  payload_bytes: number
}

export interface ErrorFrame {
  request_id: number
  error: string
}

export type ServerMessage = FrameHeader | ErrorFrame

export function isErrorFrame(msg: ServerMessage): msg is ErrorFrame {
  return (msg as ErrorFrame).error !== undefined
}

export interface HealthInfo {
  version: string
  checkpoint_digest: string
  frames: number
  window: number
  min_radius: number
}
