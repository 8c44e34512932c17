"""End-to-end checks across real process and trust boundaries."""

from __future__ import annotations

import json
import subprocess
import sys
import time

import pytest
from websockets.sync.client import connect as ws_connect

from teleop.domain import PlatformConfig, Pose2D, Trajectory, TrajectoryPoint, encode_trajectory
from teleop.endpoints import EndpointConfig
from teleop.safety import SafetyConfig
from teleop.sim_vehicle import SimConfig, SimVehicle, load_scenario
from teleop.streams import PT_TRAJECTORY, STREAM_TRAJECTORY
from teleop.transport.channel import ChannelTimeout, open_channel
from teleop.vehicle_agent import SimVehicleInterface
from teleop.vehicle_service import VehicleAgentService


class TestVehicleSideRevalidation:
    def test_invalid_trajectory_bypassing_local_checks_gets_no_ack(self, endpoints):
        platform = PlatformConfig()
        scenario = load_scenario("construction_site")
        sim = SimVehicle(SimConfig.from_platform(platform, initial_pose=scenario.start_pose))
        service = VehicleAgentService(endpoints, platform, SimVehicleInterface(sim, scenario), SafetyConfig())
        service.start()
        try:
            # a rogue sender skips the station's validation entirely
            channel = open_channel(endpoints.channel_for(STREAM_TRAJECTORY, "operator"))
            bad = Trajectory(
                (
                    TrajectoryPoint(Pose2D(0.0, 0.0, 0.0), 2.0),
                    TrajectoryPoint(Pose2D(2.0, 0.0, 0.0), 2.0),  # nonzero terminal velocity
                ),
                id=99,
            )
            channel.send(encode_trajectory(bad), PT_TRAJECTORY)
            with pytest.raises(ChannelTimeout):
                channel.recv(timeout_ms=600)
            assert service.agent.trajectory_box.latest() is None
            channel.close()
        finally:
            service.stop()


class TestSeparateProcesses:
    def test_station_and_vehicle_as_own_processes(self, endpoints, tmp_path):
        """The two daemons, wired only by the endpoint config file."""
        endpoints_file = tmp_path / "endpoints.cfg"
        endpoints.dump(endpoints_file)
        platform_file = tmp_path / "platform.cfg"
        PlatformConfig().dump(platform_file)

        vehicle = subprocess.Popen(
            [sys.executable, "-u", "-m", "teleop.vehicle_agent_cli",
             "--endpoints", str(endpoints_file), "--platform-config", str(platform_file)],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        station = None
        try:
            time.sleep(1.0)  # let the vehicle bind its channels
            assert vehicle.poll() is None, vehicle.stdout.read()
            station = subprocess.Popen(
                [sys.executable, "-u", "-m", "teleop.operator_station.cli",
                 "--vehicle-endpoints", str(endpoints_file), "--platform-config", str(platform_file),
                 "--ui-bind", "127.0.0.1:0", "--connect"],
                stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
            )
            # the station prints the gateway address, then the connect result
            url = None
            deadline = time.monotonic() + 15
            lines = []
            while time.monotonic() < deadline:
                line = station.stdout.readline()
                if not line:
                    break
                lines.append(line)
                if line.startswith("UI gateway listening on "):
                    url = line.split()[-1].strip()
                if line.startswith("connected;"):
                    break
            assert url is not None, "".join(lines)
            assert any(l.startswith("connected; operator state: UPLINK") for l in lines), "".join(lines)

            # drive the session across the process boundary via the gateway
            with ws_connect(url) as ws:
                snapshot = json.loads(ws.recv(timeout=5))
                assert snapshot["kind"] == "snapshot"
                assert snapshot["payload"]["manager"]["operator_state"] == "UPLINK"
                time.sleep(0.6)  # vehicle heartbeats make the command path healthy
                ws.send(json.dumps({"kind": "session_cmd", "id": "s", "payload": {"action": "start", "concept": "direct"}}))
                deadline = time.monotonic() + 10
                state = None
                while time.monotonic() < deadline:
                    message = json.loads(ws.recv(timeout=10))
                    if message["kind"] == "ack" and message["payload"].get("id") == "s":
                        state = message["payload"]["manager"]["operator_state"]
                        break
                    if message["kind"] == "error" and message["payload"].get("id") == "s":
                        pytest.fail(f"start rejected: {message['payload']}")
                assert state == "TELEOPERATION"
        finally:
            if station is not None:
                station.terminate()
                station.wait(timeout=10)
            vehicle.terminate()
            vehicle.wait(timeout=10)
