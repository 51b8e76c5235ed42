// One-in-flight request pacing with monotone display ordering.
//
// Mirrors the server's latest-wins queue: the next request is sent only after
// the previous response arrived (or timed out), request ids strictly increase
// per session, and a frame is displayed only if its id is >= every previously
// displayed id.

export interface DisplayDecision {
  display: boolean
  latencyMs: number | null
}

export class RequestPacer {
  private nextId = 1
  private inflightId: number | null = null
  private inflightSince = 0
  private displayedId = 0

  constructor(readonly staleTimeoutMs: number = 5000) {}

  get inflight(): number | null {
    return this.inflightId
  }

  get lastDisplayedId(): number {
    return this.displayedId
  }

  canSend(now: number): boolean {
    if (this.inflightId === null) return true
    return now - this.inflightSince >= this.staleTimeoutMs
  }

  begin(now: number): number {
    const id = this.nextId++
    this.inflightId = id
    this.inflightSince = now
    return id
  }

  /** Response bookkeeping; display is true only for monotone non-decreasing ids. */
  onResponse(id: number, now: number): DisplayDecision {
    let latencyMs: number | null = null
    if (this.inflightId !== null && id >= this.inflightId) {
      latencyMs = now - this.inflightSince
    }
    if (this.inflightId !== null && id >= this.inflightId) {
      this.inflightId = null
    }
    if (id < this.displayedId) {
      return { display: false, latencyMs }
    }
    this.displayedId = id
    return { display: true, latencyMs }
  }

  /** An unanswered request older than the timeout marks the view as stale. */
  isStale(now: number): boolean {
    return this.inflightId !== null && now - this.inflightSince > this.staleTimeoutMs
  }

  reset(): void {
    // fresh session: ids restart, display ordering restarts
    this.nextId = 1
    this.inflightId = null
    this.displayedId = 0
  }
}
