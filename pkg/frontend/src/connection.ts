// Websocket session with healthz lookup and reconnect backoff.

import type { HealthInfo, RenderRequest, ServerMessage } from './protocol.js'

export interface SocketLike {
  send(data: string): void
  close(): void
  onmessage?: (data: string | ArrayBuffer | Uint8Array) => void
  onopen?: () => void
  onclose?: () => void
}

export interface SessionHandlers {
  onHeader(msg: ServerMessage): void
  onImage(bytes: Uint8Array): void
  onOpen(): void
  onClose(): void
}

export interface SessionOptions {
  makeSocket: (url: string) => SocketLike
  fetchJson: (url: string) => Promise<HealthInfo>
  setTimer: (fn: () => void, ms: number) => unknown
  backoffMs?: number
  maxBackoffMs?: number
}

/** Pairs JSON headers with the binary frame that follows them. */
export class Session {
  private sock: SocketLike | null = null
  private backoff: number
  private closedByUser = false
  connected = false

  constructor(
    readonly wsUrl: string,
    readonly httpUrl: string,
    readonly handlers: SessionHandlers,
    readonly opts: SessionOptions,
  ) {
    this.backoff = opts.backoffMs ?? 500
  }

  async health(): Promise<HealthInfo> {
    return this.opts.fetchJson(`${this.httpUrl}/healthz`)
  }

  open(): void {
    this.closedByUser = false
    const sock = this.opts.makeSocket(this.wsUrl)
    this.sock = sock
    sock.onopen = () => {
      this.connected = true
      this.backoff = this.opts.backoffMs ?? 500
      this.handlers.onOpen()
    }
    sock.onmessage = (data) => {
      if (typeof data === 'string') {
        this.handlers.onHeader(JSON.parse(data) as ServerMessage)
      } else {
        this.handlers.onImage(data instanceof Uint8Array ? data : new Uint8Array(data))
      }
    }
    sock.onclose = () => {
      this.connected = false
      this.sock = null
      this.handlers.onClose()
      if (!this.closedByUser) {
        const wait = this.backoff
        this.backoff = Math.min(this.backoff * 2, this.opts.maxBackoffMs ?? 8000)
        this.opts.setTimer(() => this.open(), wait)
      }
    }
  }

  send(req: RenderRequest): boolean {
    if (!this.sock || !this.connected) return false
    this.sock.send(JSON.stringify(req))
    return true
  }

  close(): void {
    this.closedByUser = true
    this.sock?.close()
  }
}
