/**
 * Browser entry point: wires the WebSocket gateway to the view model, the
 * canvases and the control widgets. All protocol and state logic lives in
 * the imported modules; this file only touches the DOM.
 */

import { GamepadPoller, ControlPanel } from "./controls.js";
import { parseMediaFrame, pingMsg } from "./protocol.js";
import { MapRenderer, drawLaserSweep, drawSonarBars, type BlitTarget } from "./render.js";
import { ConsoleViewModel, panelText } from "./state.js";

const GATEWAY_URL =
  new URLSearchParams(location.search).get("gateway") ?? "ws://127.0.0.1:8765";

async function browserInflate(data: Uint8Array): Promise<Uint8Array> {
  const ds = new DecompressionStream("deflate");
  const stream = new Blob([data as BlobPart]).stream().pipeThrough(ds);
  const buf = await new Response(stream).arrayBuffer();
  return new Uint8Array(buf);
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const vm = new ConsoleViewModel(browserInflate);

  const mapCanvas = el<HTMLCanvasElement>("map");
  const laserCanvas = el<HTMLCanvasElement>("laser");
  const sonarCanvas = el<HTMLCanvasElement>("sonar");
  const frameImg = el<HTMLImageElement>("camera");
  const banner = el<HTMLDivElement>("banner");
  const backing = document.createElement("canvas");
  let renderer: MapRenderer | null = null;

  const ws = new WebSocket(GATEWAY_URL);
  ws.binaryType = "arraybuffer";

  ws.onmessage = async (event: MessageEvent) => {
    if (event.data instanceof ArrayBuffer) {
      vm.applyFrame(parseMediaFrame(event.data), performance.now());
      return;
    }
    const kind = await vm.applyText(event.data as string);
    if (kind === "hello") {
      backing.width = vm.grid.cols;
      backing.height = vm.grid.rows;
      const ctx = backing.getContext("2d")!;
      renderer = new MapRenderer(ctx, backing);
      renderer.paintPending(vm);
    }
  };
  ws.onclose = () => {
    el("link").textContent = "gateway closed";
  };

  const controls = new ControlPanel((text) => {
    if (ws.readyState === WebSocket.OPEN) ws.send(text);
  });
  const buttonmap: [string, () => void][] = [
    ["btn-forward", () => controls.forward()],
    ["btn-back", () => controls.backward()],
    ["btn-left", () => controls.turnLeft()],
    ["btn-right", () => controls.turnRight()],
    ["btn-stop", () => controls.stop()],
    ["btn-connect", () => controls.connect()],
    ["btn-disconnect", () => controls.disconnect()],
  ];
  for (const [id, fn] of buttonmap) {
    const btn = el<HTMLButtonElement>(id);
    btn.addEventListener("click", fn);
    if (["btn-forward", "btn-back", "btn-left", "btn-right"].includes(id)) {
      btn.addEventListener("mouseup", () => controls.stop());
    }
  }
  el<HTMLSelectElement>("mode-select").addEventListener("change", (ev) => {
    controls.setMode((ev.target as HTMLSelectElement).value as never);
  });
  const sendPtz = () => {
    controls.ptz(
      Number(el<HTMLInputElement>("ptz-pan").value),
      Number(el<HTMLInputElement>("ptz-tilt").value),
      Number(el<HTMLInputElement>("ptz-zoom").value),
    );
  };
  for (const id of ["ptz-pan", "ptz-tilt", "ptz-zoom"]) {
    el<HTMLInputElement>(id).addEventListener("change", sendPtz);
  }
  window.addEventListener("keydown", (ev) => {
    if (controls.keydown(ev.key)) ev.preventDefault();
  });
  window.addEventListener("keyup", (ev) => {
    if (controls.keyup(ev.key)) ev.preventDefault();
  });

  const pads = new GamepadPoller(
    (text) => {
      if (ws.readyState === WebSocket.OPEN) ws.send(text);
    },
    () => {
      const pad = navigator.getGamepads?.()[0];
      return pad ? [pad.axes[0] ?? 0, pad.axes[1] ?? 0] : null;
    },
  );

  let frameUrl: string | null = null;
  let shownRevision = -1;

  function redraw(): void {
    pads.poll(performance.now());
    if (vm.revision !== shownRevision) {
      shownRevision = vm.revision;
      if (renderer) {
        renderer.paintPending(vm);
        const ctx = mapCanvas.getContext("2d")! as unknown as BlitTarget;
        (ctx as unknown as CanvasRenderingContext2D).imageSmoothingEnabled = false;
        renderer.draw(ctx, vm, mapCanvas.width, mapCanvas.height);
      }
      if (vm.telemetry) {
        drawLaserSweep(
          laserCanvas.getContext("2d")!, vm.telemetry.laser,
          laserCanvas.width, laserCanvas.height,
        );
        drawSonarBars(
          sonarCanvas.getContext("2d")!, vm.telemetry.sonar,
          sonarCanvas.width, sonarCanvas.height,
        );
      }
      if (vm.lastFrame) {
        const blob = new Blob([vm.lastFrame.payload as BlobPart], { type: "image/png" });
        if (frameUrl) URL.revokeObjectURL(frameUrl);
        frameUrl = URL.createObjectURL(blob);
        frameImg.src = frameUrl;
      }
      const text = panelText(vm);
      for (const [id, value] of Object.entries(text)) {
        el(id).textContent = value;
      }
      banner.classList.toggle("visible", vm.interruptionBanner());
      banner.textContent = vm.autonomyActive()
        ? "LINK INTERRUPTED — AUTONOMOUS SAFE-POINT NAVIGATION"
        : "LINK INTERRUPTED";
      el("stale").classList.toggle("visible", vm.staleData);
    }
    const age = vm.frameAgeMs(performance.now());
    el("frame-age").textContent = age === null ? "—" : `${age.toFixed(0)} ms`;
    requestAnimationFrame(redraw);
  }

  setInterval(() => {
    if (ws.readyState === WebSocket.OPEN) ws.send(pingMsg());
  }, 5000);
  requestAnimationFrame(redraw);
}

main();
