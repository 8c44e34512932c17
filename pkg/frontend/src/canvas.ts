// Canvas painter: executes a SceneDrawList. Pure drawing, no layout logic.

import { DrawOp, SceneDrawList } from "./scene.js";

export function paintScene(ctx: CanvasRenderingContext2D, scene: SceneDrawList, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#1b1b1f";
  ctx.fillRect(0, 0, width, height);
  for (const op of scene.ops) {
    paintOp(ctx, op);
  }
  if (scene.greyed) {
    ctx.fillStyle = "rgba(40, 40, 40, 0.65)";
    ctx.fillRect(0, 0, width, height);
  }
}

function paintOp(ctx: CanvasRenderingContext2D, op: DrawOp): void {
  switch (op.op) {
    case "polyline": {
      if (op.points.length < 2) return;
      ctx.strokeStyle = op.color;
      ctx.lineWidth = op.width;
      ctx.setLineDash(op.dashed ? [8, 6] : []);
      ctx.beginPath();
      ctx.moveTo(op.points[0].px, op.points[0].py);
      for (const point of op.points.slice(1)) ctx.lineTo(point.px, point.py);
      ctx.stroke();
      ctx.setLineDash([]);
      break;
    }
    case "box": {
      ctx.save();
      ctx.translate(op.center.px, op.center.py);
      ctx.rotate(-op.headingRad); // world CCW -> screen CW
      if (op.fill) {
        ctx.fillStyle = op.color;
        ctx.fillRect(-op.lengthPx / 2, -op.widthPx / 2, op.lengthPx, op.widthPx);
      } else {
        ctx.strokeStyle = op.color;
        ctx.lineWidth = 2;
        ctx.strokeRect(-op.lengthPx / 2, -op.widthPx / 2, op.lengthPx, op.widthPx);
      }
      ctx.restore();
      break;
    }
    case "dot": {
      ctx.fillStyle = op.color;
      ctx.beginPath();
      ctx.arc(op.at.px, op.at.py, op.radiusPx, 0, 2 * Math.PI);
      ctx.fill();
      break;
    }
  }
}
