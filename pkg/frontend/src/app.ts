// Viewer core: drives the interaction loop against a Session, DOM-free so the
// same code runs under the browser shell and the headless test client.

import { Session } from './connection.js'
import { RequestPacer } from './pacing.js'
import { isErrorFrame, type FrameHeader, type RenderRequest } from './protocol.js'
import {
  advancePlayback,
  applyDrag,
  applyScroll,
  clampRadius,
  initialState,
  scrubTo,
  type Limits,
  type ViewerState,
} from './state.js'

export interface DisplayedFrame {
  requestId: number
  frame: number
  image: Uint8Array
  header: FrameHeader
}

export interface AppOptions {
  limits: Limits
  resolution: number
  staleTimeoutMs?: number
  now?: () => number
  onDisplay?: (f: DisplayedFrame) => void
  onStale?: (stale: boolean) => void
  onError?: (msg: string) => void
}

export class ViewerApp {
  state: ViewerState
  readonly pacer: RequestPacer
  displayed: DisplayedFrame | null = null
  private dirty = true // the initial frame
  private pendingHeader: FrameHeader | null = null
  private inflightMeta = new Map<number, { frame: number }>()
  private now: () => number
  private staleShown = false

  constructor(readonly session: Session, readonly opts: AppOptions) {
    this.state = initialState(opts.limits)
    this.pacer = new RequestPacer(opts.staleTimeoutMs ?? 5000)
    this.now = opts.now ?? (() => Date.now())
  }

  // ---- interaction events -------------------------------------------------

  drag(dxPx: number, dyPx: number): void {
    this.state = applyDrag(this.state, dxPx, dyPx, this.opts.limits)
    this.markDirty()
  }

  scroll(deltaY: number): void {
    this.state = applyScroll(this.state, deltaY, this.opts.limits)
    this.markDirty()
  }

  scrub(frame: number): void {
    this.state = scrubTo(this.state, frame, this.opts.limits)
    this.markDirty()
  }

  playbackTick(): void {
    const before = this.state.frame
    this.state = advancePlayback(this.state, this.opts.limits)
    if (this.state.frame !== before) this.markDirty()
  }

  onSessionOpen(): void {
    // fresh request-id sequence per connection
    this.pacer.reset()
    this.inflightMeta.clear()
    this.pendingHeader = null
    this.dirty = true
    this.pump()
  }

  private markDirty(): void {
    this.dirty = true
    this.pump()
  }

  // ---- request pump: at most one in flight --------------------------------

  pump(): void {
    const t = this.now()
    if (!this.dirty || !this.session.connected || !this.pacer.canSend(t)) return
    const id = this.pacer.begin(t)
    const req: RenderRequest = {
      request_id: id,
      pose: { frame: this.state.frame },
      camera: {
        orbit: {
          azimuth: this.state.azimuth,
          elevation: this.state.elevation,
          radius: clampRadius(this.state.radius, this.opts.limits),
        },
      },
      resolution: this.opts.resolution,
    }
    this.inflightMeta.set(id, { frame: this.state.frame })
    this.dirty = false
    if (!this.session.send(req)) {
      this.dirty = true // socket dropped between checks; retry on reconnect
    }
  }

  // ---- response handling ---------------------------------------------------

  onHeader(msg: FrameHeader | { request_id: number; error: string }): void {
    if (isErrorFrame(msg)) {
      this.inflightMeta.delete(msg.request_id)
      this.pacer.onResponse(msg.request_id, this.now())
      this.opts.onError?.(msg.error)
      this.pump()
      return
    }
    this.pendingHeader = msg
  }

  onImage(bytes: Uint8Array): void {
    const header = this.pendingHeader
    if (!header) return
    this.pendingHeader = null
    const t = this.now()
    const decision = this.pacer.onResponse(header.request_id, t)
    this.inflightMeta.delete(header.request_id)
    if (decision.display) {
      this.displayed = {
        requestId: header.request_id,
        frame: header.frame,
        image: bytes,
        header,
      }
      this.state = {
        ...this.state,
        lastLatencyMs: decision.latencyMs,
        timings: header.timings,
      }
      this.opts.onDisplay?.(this.displayed)
    }
    this.setStale(false)
    this.pump()
  }

  /** Stale when the in-flight request exceeded the timeout without a response. */
  checkStale(): boolean {
    const stale = this.pacer.isStale(this.now())
    this.setStale(stale)
    if (stale) this.pump() // timeout frees the pacing slot
    return stale
  }

  private setStale(v: boolean): void {
    if (v !== this.staleShown) {
      this.staleShown = v
      this.opts.onStale?.(v)
    }
  }
}
