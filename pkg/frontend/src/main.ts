// Browser shell: wires DOM events to the viewer core and paints received frames.

import { ViewerApp } from './app.js'
import { Session } from './connection.js'
import type { HealthInfo } from './protocol.js'
import { formatTimings } from './overlay.js'

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing #${id}`)
  return node as T
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>('view')
  const ctx = canvas.getContext('2d')!
  const banner = el<HTMLDivElement>('banner')
  const statusDot = el<HTMLSpanElement>('status')
  const digestEl = el<HTMLSpanElement>('digest')
  const overlay = el<HTMLDivElement>('overlay')
  const stale = el<HTMLDivElement>('stale')
  const slider = el<HTMLInputElement>('timeline')
  const playBtn = el<HTMLButtonElement>('play')
  const frameLabel = el<HTMLSpanElement>('frame-label')

  const httpUrl = location.origin
  const wsUrl = httpUrl.replace(/^http/, 'ws') + '/render'

  const handlers = {
    onHeader: (m: any) => app.onHeader(m),
    onImage: (b: Uint8Array) => app.onImage(b),
    onOpen: () => {
      banner.style.display = 'none'
      statusDot.className = 'ok'
      app.onSessionOpen()
    },
    onClose: () => {
      banner.textContent = 'connection lost, retrying'
      banner.style.display = 'block'
      statusDot.className = 'bad'
    },
  }
  const session = new Session(wsUrl, httpUrl, handlers, {
    makeSocket: (url) => {
      const ws = new WebSocket(url)
      ws.binaryType = 'arraybuffer'
      const like = {
        send: (d: string) => ws.send(d),
        close: () => ws.close(),
      } as any
      ws.onmessage = (ev) => like.onmessage?.(ev.data)
      ws.onopen = () => like.onopen?.()
      ws.onclose = () => like.onclose?.()
      return like
    },
    fetchJson: async (url) => (await fetch(url)).json(),
    setTimer: (fn, ms) => setTimeout(fn, ms),
  })

  let health: HealthInfo
  try {
    health = await session.health()
    digestEl.textContent = health.checkpoint_digest.slice(0, 12)
  } catch (e) {
    banner.textContent = 'server unreachable, retrying'
    banner.style.display = 'block'
    statusDot.className = 'bad'
    setTimeout(boot, 2000)
    return
  }

  const limits = {
    minRadius: Math.max(health.min_radius, 0.8),
    maxRadius: 6.0,
    minFrame: health.window,
    maxFrame: health.frames - 1,
  }
  slider.min = String(limits.minFrame)
  slider.max = String(limits.maxFrame)

  const app = new ViewerApp(session, {
    limits,
    resolution: 128,
    staleTimeoutMs: 5000,
    onDisplay: async (f) => {
      const blob = new Blob([f.image as BlobPart], { type: 'image/png' })
      const bmp = await createImageBitmap(blob)
      ctx.imageSmoothingEnabled = false
      ctx.drawImage(bmp, 0, 0, canvas.width, canvas.height)
      overlay.textContent = formatTimings(app.state.timings, app.state.lastLatencyMs)
      frameLabel.textContent = `frame ${f.frame}`
      slider.value = String(f.frame)
    },
    onStale: (s) => {
      stale.style.display = s ? 'block' : 'none'
    },
    onError: (msg) => {
      banner.textContent = `server: ${msg}`
      banner.style.display = 'block'
      setTimeout(() => (banner.style.display = 'none'), 2500)
    },
  })

  let dragging = false
  let last: [number, number] = [0, 0]
  canvas.addEventListener('pointerdown', (e) => {
    dragging = true
    last = [e.clientX, e.clientY]
    canvas.setPointerCapture(e.pointerId)
  })
  canvas.addEventListener('pointermove', (e) => {
    if (!dragging) return
    app.drag(e.clientX - last[0], e.clientY - last[1])
    last = [e.clientX, e.clientY]
  })
  canvas.addEventListener('pointerup', () => (dragging = false))
  canvas.addEventListener('wheel', (e) => {
    e.preventDefault()
    app.scroll(e.deltaY)
  }, { passive: false })
  slider.addEventListener('input', () => app.scrub(Number(slider.value)))
  playBtn.addEventListener('click', () => {
    app.state = { ...app.state, playing: !app.state.playing }
    playBtn.textContent = app.state.playing ? 'pause' : 'play'
  })

  session.open()
  setInterval(() => {
    app.checkStale()
    if (app.state.playing) app.playbackTick()
  }, 1000 / app.state.playbackFps)
}

boot()
