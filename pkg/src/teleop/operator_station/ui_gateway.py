"""WebSocket gateway between the operator station and browser HMIs.

Typed JSON records {kind, payload, stamp} both ways. Every client gets a
full snapshot on connect, then streamed deltas. The first client holds the
single write seat (one operator per vehicle); later clients are read-only
mirrors and get error replies to any command. Malformed input produces an
error record but never drops the connection.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time

import websockets

from teleop.domain import Concept, object_to_dict, polyline_to_dict, vehicle_state_to_dict
from teleop.operator_station.input_mapping import InputFrame
from teleop.operator_station.station import CommitError, OperatorStation, SessionError
from teleop.state_machine import InvalidTransition

OUT_KINDS = ("snapshot", "status", "vehicle_state", "objects", "map", "draft", "ack", "error")
IN_KINDS = ("input", "session_cmd", "traj_edit", "traj_commit")


def _record(kind: str, payload: dict, stamp: int | None = None) -> str:
    return json.dumps({"kind": kind, "payload": payload, "stamp": stamp or time.time_ns()})


class UiGateway:
    """Serves the station state to UI clients; applies their commands."""

    def __init__(
        self,
        station: OperatorStation,
        bind: tuple[str, int] = ("127.0.0.1", 8765),
        *,
        stream_rate_hz: float = 10.0,
    ):
        self.station = station
        self.bind = bind
        self.stream_rate_hz = stream_rate_hz
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._server = None
        self._clients: set = set()
        self._writer = None
        self._started = threading.Event()
        self._port: int | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> tuple[str, int]:
        self._thread = threading.Thread(target=self._run, daemon=True, name="ui-gateway")
        self._thread.start()
        if not self._started.wait(timeout=5.0):
            raise OSError(f"gateway failed to bind on {self.bind}")
        return (self.bind[0], self._port)

    def stop(self) -> None:
        loop = self._loop
        if loop is not None and loop.is_running():
            loop.call_soon_threadsafe(loop.stop)
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self._thread = None
        self._loop = None

    def _run(self) -> None:
        loop = asyncio.new_event_loop()
        asyncio.set_event_loop(loop)
        self._loop = loop

        stream_task: asyncio.Task | None = None

        async def boot():
            nonlocal stream_task
            self._server = await websockets.serve(self._handle_client, self.bind[0], self.bind[1])
            self._port = self._server.sockets[0].getsockname()[1]
            stream_task = loop.create_task(self._stream())
            self._started.set()

        try:
            loop.run_until_complete(boot())
            loop.run_forever()
        except OSError:
            self._started.set()  # unblock start(); _port stays None
        finally:
            if stream_task is not None:
                stream_task.cancel()
            if self._server is not None:
                self._server.close()
                try:
                    loop.run_until_complete(self._server.wait_closed())
                except RuntimeError:
                    pass
            loop.close()

    # -- outbound streaming ---------------------------------------------------

    def _snapshot_payload(self) -> dict:
        station = self.station
        state = station.vehicle_state_box.latest()
        return {
            "manager": station.manager_state(),
            "status": station.status_snapshot().to_dict(),
            "vehicle_state": vehicle_state_to_dict(state) if state is not None else None,
            "objects": [object_to_dict(o) for o in station.objects],
            "map": [polyline_to_dict(p) for p in station.map_polylines],
            "draft": station.draft.to_dict(),
        }

    async def _stream(self) -> None:
        period = 1.0 / self.stream_rate_hz
        last_draft = None
        last_scene = 0
        while True:
            await asyncio.sleep(period)
            if not self._clients:
                continue
            station = self.station
            messages = [_record("status", station.status_snapshot().to_dict())]
            state = station.vehicle_state_box.latest()
            if state is not None:
                messages.append(_record("vehicle_state", vehicle_state_to_dict(state)))
            draft = station.draft.to_dict()
            if draft != last_draft:
                messages.append(_record("draft", draft))
                last_draft = draft
            now = time.time_ns()
            if now - last_scene > 2e9:
                messages.append(_record("objects", {"objects": [object_to_dict(o) for o in station.objects]}))
                messages.append(_record("map", {"polylines": [polyline_to_dict(p) for p in station.map_polylines]}))
                last_scene = now
            for client in list(self._clients):
                for message in messages:
                    try:
                        await client.send(message)
                    except websockets.ConnectionClosed:
                        self._clients.discard(client)
                        if client is self._writer:
                            self._writer = None
                        break

    # -- inbound handling --------------------------------------------------------

    async def _handle_client(self, websocket) -> None:
        self._clients.add(websocket)
        if self._writer is None:
            self._writer = websocket
        role = "writer" if websocket is self._writer else "mirror"
        try:
            await websocket.send(_record("snapshot", {**self._snapshot_payload(), "role": role}))
            async for raw in websocket:
                reply = await self._dispatch(websocket, raw)
                if reply is not None:
                    await websocket.send(reply)
        except websockets.ConnectionClosed:
            pass
        finally:
            self._clients.discard(websocket)
            if websocket is self._writer:
                self._writer = None

    async def _dispatch(self, websocket, raw) -> str | None:
        try:
            message = json.loads(raw)
            kind = message["kind"]
            payload = message.get("payload", {})
        except (json.JSONDecodeError, TypeError, KeyError) as err:
            return _record("error", {"detail": f"malformed message: {err}"})
        if kind not in IN_KINDS:
            return _record("error", {"detail": f"unknown kind {kind!r}"})
        if websocket is not self._writer:
            return _record("error", {"detail": "read-only mirror", "for": kind, "id": message.get("id")})
        loop = asyncio.get_running_loop()
        try:
            if kind == "input":
                self.station.submit_input_frame(InputFrame.from_dict(payload))
                return None  # high-rate stream: no per-frame acks
            if kind == "session_cmd":
                result = await loop.run_in_executor(None, self._session_cmd, payload)
            elif kind == "traj_edit":
                result = {"draft": self.station.edit_trajectory(payload)}
            else:  # traj_commit
                trajectory_id = await loop.run_in_executor(None, self.station.commit_trajectory)
                result = {"trajectory_id": trajectory_id, "draft": self.station.draft.to_dict()}
        except (SessionError, InvalidTransition, ValueError, IndexError, KeyError) as err:
            detail = str(err)
            extra = {}
            if isinstance(err, CommitError) and err.violations:
                extra["violations"] = list(err.violations)
            return _record(
                "error",
                {"detail": detail, "for": kind, "id": message.get("id"),
                 "manager": self.station.manager_state(), **extra},
            )
        return _record(
            "ack",
            {"for": kind, "id": message.get("id"), "ok": True,
             "manager": self.station.manager_state(), **result},
        )

    def _session_cmd(self, payload: dict) -> dict:
        action = payload.get("action")
        station = self.station
        if action == "connect":
            station.connect()
        elif action == "disconnect":
            station.disconnect()
        elif action == "start":
            concept = Concept(payload["concept"]) if payload.get("concept") else None
            station.start_teleoperation(concept)
        elif action == "stop":
            station.stop_teleoperation()
        elif action == "set_concept":
            station.set_concept(Concept(payload["concept"]))
        else:
            raise ValueError(f"unknown session action {action!r}")
        return {}
