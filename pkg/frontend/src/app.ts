// Browser bootstrap: wires the gateway, view model, manager panel, input
// capture, and the canvas views together. All decision logic lives in the
// imported modules; this file only touches the DOM.

import { paintScene } from "./canvas.js";
import { GatewayClient } from "./gateway.js";
import { InputPump, KeyboardDriver } from "./input.js";
import { ManagerPanel } from "./manager.js";
import { ViewModelStore } from "./viewmodel.js";
import { renderDirectControlView, renderTrajectoryView } from "./views.js";
import { ViewportController } from "./viewport.js";
import { commitDraft, placeWaypoint, undoWaypoint, clearDraft } from "./waypoints.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("gateway") ?? "ws://127.0.0.1:8765";

  const store = new ViewModelStore();
  const gateway = new GatewayClient(url);
  const panel = new ManagerPanel(gateway, store);
  const keyboard = new KeyboardDriver();

  const canvas = element<HTMLCanvasElement>("scene");
  const forward = element<HTMLCanvasElement>("forward");
  const ctx = canvas.getContext("2d")!;
  const forwardCtx = forward.getContext("2d")!;
  const viewport = new ViewportController({
    centerX: 0,
    centerY: 0,
    pxPerMeter: 8,
    width: canvas.width,
    height: canvas.height,
  });

  gateway.onRecord((record) => store.apply(record));
  gateway.onConnectionState((state) => store.setConnection(state));

  window.addEventListener("keydown", (event) => {
    if (event.code === "Space") event.preventDefault();
    keyboard.keyDown(event.code);
  });
  window.addEventListener("keyup", (event) => keyboard.keyUp(event.code));
  window.addEventListener("blur", () => keyboard.setFocused(false));
  window.addEventListener("focus", () => keyboard.setFocused(true));

  const pump = new InputPump(keyboard, (frame) => {
    const vm = store.current;
    if (vm.manager.teleoperation_active && vm.manager.concept === "direct" && vm.role === "writer") {
      gateway.send("input", frame as unknown as Record<string, unknown>);
    }
  });

  element<HTMLButtonElement>("btn-connect").onclick = () => panel.connect();
  element<HTMLButtonElement>("btn-disconnect").onclick = () => panel.disconnect();
  element<HTMLButtonElement>("btn-start").onclick = () =>
    panel.start(element<HTMLSelectElement>("concept").value as "direct" | "trajectory");
  element<HTMLButtonElement>("btn-stop").onclick = () => panel.stop();
  element<HTMLSelectElement>("concept").onchange = (event) =>
    panel.setConcept((event.target as HTMLSelectElement).value as "direct" | "trajectory");
  element<HTMLButtonElement>("btn-commit").onclick = () => commitDraft(gateway);
  element<HTMLButtonElement>("btn-undo").onclick = () => undoWaypoint(gateway);
  element<HTMLButtonElement>("btn-clear").onclick = () => clearDraft(gateway);
  element<HTMLInputElement>("view-lock").onchange = (event) => {
    viewport.lockWhileDriving = (event.target as HTMLInputElement).checked;
  };

  canvas.addEventListener("click", (event) => {
    const vm = store.current;
    if (vm.manager.concept !== "trajectory" || vm.role !== "writer") return;
    const rect = canvas.getBoundingClientRect();
    const velocity = parseFloat(element<HTMLInputElement>("velocity").value);
    const result = placeWaypoint(
      gateway, viewport.transform, event.clientX - rect.left, event.clientY - rect.top, velocity,
    );
    if (!result.sent && result.hint) {
      element<HTMLSpanElement>("hint").textContent = result.hint;
    }
  });
  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const rect = canvas.getBoundingClientRect();
    viewport.zoom(event.deltaY < 0 ? 1.15 : 1 / 1.15, {
      px: event.clientX - rect.left,
      py: event.clientY - rect.top,
    });
  });

  function repaint(): void {
    const vm = store.current;
    const now = Date.now();
    viewport.setDriving(vm.manager.teleoperation_active);
    if (vm.vehicleState) {
      viewport.follow(vm.vehicleState.pose.x, vm.vehicleState.pose.y);
    }
    const panelView = panel.view();
    element("state").textContent = panelView.operatorState;
    element("conn").textContent = panelView.connectionText;
    element("err").textContent = panelView.lastError ?? "";

    if (vm.manager.concept === "trajectory") {
      const screen = renderTrajectoryView(vm, viewport.transform, now);
      forward.style.display = "block";
      paintScene(forwardCtx, screen.forwardScene, forward.width, forward.height);
      paintScene(ctx, screen.mapScene, canvas.width, canvas.height);
      updateBar(screen.bottomBar, screen.modeBadge, screen.staleWarning);
    } else {
      const screen = renderDirectControlView(vm, viewport.transform, now, targetSpeed(vm));
      forward.style.display = "none";
      paintScene(ctx, screen.scene, canvas.width, canvas.height);
      updateBar(screen.bottomBar, screen.modeBadge, screen.staleWarning);
    }
    requestAnimationFrame(repaint);
  }

  function targetSpeed(vm: ReturnType<typeof store.current.valueOf> extends never ? never : any): number | null {
    return vm.lastAck?.targetSpeed ?? null;
  }

  function updateBar(bar: any, badge: any, warning: string | null): void {
    element("actual-speed").textContent =
      bar.actualSpeedMps === null ? "--" : `${(bar.actualSpeedMps * 3.6).toFixed(1)} km/h`;
    element("target-speed").textContent =
      bar.targetSpeedMps === null ? "--" : `${(bar.targetSpeedMps * 3.6).toFixed(1)} km/h`;
    element("gear").textContent = bar.gear ?? "--";
    element("latency").textContent = bar.latencyText;
    const badgeNode = element("badge");
    badgeNode.textContent = badge.label;
    badgeNode.style.background = badge.color;
    element("warning").textContent = warning ?? "";
  }

  gateway
    .connect()
    .then(() => {
      pump.start();
      repaint();
    })
    .catch(() => {
      element("conn").textContent = "gateway unreachable";
    });
}

boot();
