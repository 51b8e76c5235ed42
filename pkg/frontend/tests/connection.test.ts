import { describe, expect, it } from 'vitest'

import { Session, type SocketLike } from '../src/connection.js'
import { ViewerApp } from '../src/app.js'
import type { FrameHeader } from '../src/protocol.js'

class FakeSocket implements SocketLike {
  sent: string[] = []
  onmessage?: (data: string | ArrayBuffer | Uint8Array) => void
  onopen?: () => void
  onclose?: () => void
  send(data: string): void {
    this.sent.push(data)
  }
  close(): void {
    this.onclose?.()
  }
}

function makeHarness(staleTimeoutMs = 5000) {
  const sockets: FakeSocket[] = []
  const timers: Array<{ fn: () => void; ms: number }> = []
  let now = 0
  const handlers = {
    onHeader: (m: any) => app.onHeader(m),
    onImage: (b: Uint8Array) => app.onImage(b),
    onOpen: () => app.onSessionOpen(),
    onClose: () => {},
  }
  const session = new Session('ws://x/render', 'http://x', handlers, {
    makeSocket: () => {
      const s = new FakeSocket()
      sockets.push(s)
      return s
    },
    fetchJson: async () => ({
      version: '0', checkpoint_digest: 'abc', frames: 50, window: 2, min_radius: 0.5,
    }),
    setTimer: (fn, ms) => timers.push({ fn, ms }),
    backoffMs: 100,
  })
  const displayed: Array<{ id: number; frame: number }> = []
  const staleFlags: boolean[] = []
  const app = new ViewerApp(session, {
    limits: { minRadius: 1, maxRadius: 4, minFrame: 2, maxFrame: 49 },
    resolution: 64,
    staleTimeoutMs,
    now: () => now,
    onDisplay: (f) => displayed.push({ id: f.requestId, frame: f.frame }),
    onStale: (s) => staleFlags.push(s),
  })
  const reply = (sock: FakeSocket, id: number, frame: number) => {
    const header: FrameHeader = {
      request_id: id, frame,
      timings: { bake_ms: 1, raycast_ms: 1, extractor_ms: 1, mlp_ms: 1, total_ms: 5 },
      foreground_pixels: 10, payload_bytes: 3,
    }
    sock.onmessage?.(JSON.stringify(header))
    sock.onmessage?.(new Uint8Array([1, 2, 3]))
  }
  return {
    session, app, sockets, timers, displayed, staleFlags, reply,
    tick: (ms: number) => { now += ms },
  }
}

describe('session + viewer loop', () => {
  it('sends the initial frame then goes quiescent without interaction', () => {
    const h = makeHarness()
    h.session.open()
    h.sockets[0].onopen?.()
    expect(h.sockets[0].sent.length).toBe(1)
    h.reply(h.sockets[0], 1, 2)
    expect(h.sockets[0].sent.length).toBe(1) // idle: no further requests
    expect(h.displayed).toEqual([{ id: 1, frame: 2 }])
  })

  it('one in-flight: interactions coalesce until the response arrives', () => {
    const h = makeHarness()
    h.session.open()
    h.sockets[0].onopen?.()
    h.app.drag(10, 0)
    h.app.drag(10, 0)
    h.app.scroll(50)
    expect(h.sockets[0].sent.length).toBe(1) // still waiting on the initial frame
    h.reply(h.sockets[0], 1, 2)
    expect(h.sockets[0].sent.length).toBe(2) // coalesced into a single follow-up
    const req = JSON.parse(h.sockets[0].sent[1])
    expect(req.request_id).toBe(2)
  })

  it('scrub targets show up in the displayed frame metadata', () => {
    const h = makeHarness()
    h.session.open()
    h.sockets[0].onopen?.()
    h.reply(h.sockets[0], 1, 2)
    h.app.scrub(17)
    const req = JSON.parse(h.sockets[0].sent[1])
    expect(req.pose.frame).toBe(17)
    h.reply(h.sockets[0], req.request_id, 17)
    expect(h.displayed[h.displayed.length - 1]).toEqual({ id: 2, frame: 17 })
  })

  it('stale indicator fires on response timeout and clears on arrival', () => {
    const h = makeHarness(1000)
    h.session.open()
    h.sockets[0].onopen?.()
    h.tick(1500)
    expect(h.app.checkStale()).toBe(true)
    expect(h.staleFlags).toContain(true)
    h.reply(h.sockets[0], 1, 2)
    expect(h.staleFlags[h.staleFlags.length - 1]).toBe(false)
  })

  it('reconnect uses backoff and a fresh id sequence', () => {
    const h = makeHarness()
    h.session.open()
    h.sockets[0].onopen?.()
    h.reply(h.sockets[0], 1, 2)
    h.sockets[0].onclose?.()
    expect(h.timers.length).toBe(1)
    expect(h.timers[0].ms).toBe(100)
    h.timers[0].fn() // reconnect
    h.sockets[1].onopen?.()
    const req = JSON.parse(h.sockets[1].sent[0])
    expect(req.request_id).toBe(1) // fresh sequence
  })

  it('error frames release pacing and surface the message', () => {
    const errors: string[] = []
    const h = makeHarness()
    h.app.opts.onError = (m) => errors.push(m)
    h.session.open()
    h.sockets[0].onopen?.()
    h.sockets[0].onmessage?.(JSON.stringify({ request_id: 1, error: 'orbit radius 0.1 below minimum' }))
    expect(errors[0]).toMatch(/radius/)
    h.app.drag(5, 0)
    expect(h.sockets[0].sent.length).toBe(2) // slot released, next request sent
  })
})
