"""teleop-vehicle: run the vehicle agent against the simulated platform."""

from __future__ import annotations

import argparse
import signal
import time
from pathlib import Path

from teleop.domain import PlatformConfig
from teleop.endpoints import EndpointConfig
from teleop.runlog import NullLogger, RunLogger, create_run_dir
from teleop.safety import SafetyConfig
from teleop.sim_vehicle import SimConfig, SimVehicle, load_scenario
from teleop.vehicle_agent import SimVehicleInterface
from teleop.vehicle_service import VehicleAgentService


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleop-vehicle", description=__doc__)
    parser.add_argument("--endpoints", type=Path, required=True, help="endpoint config file")
    parser.add_argument("--platform-config", type=Path, required=True)
    parser.add_argument("--scenario", default="construction_site")
    parser.add_argument("--log-dir", type=Path, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    endpoints = EndpointConfig.load(args.endpoints)
    platform = PlatformConfig.load(args.platform_config)
    scenario = load_scenario(args.scenario)
    logger = NullLogger()
    if args.log_dir is not None:
        run_dir = create_run_dir(args.log_dir, manifest={"role": "vehicle", "platform": platform.name,
                                                         "scenario": scenario.name})
        logger = RunLogger(run_dir / "vehicle.log", "vehicle")
    sim = SimVehicle(SimConfig.from_platform(platform, initial_pose=scenario.start_pose))
    interface = SimVehicleInterface(sim, scenario)
    service = VehicleAgentService(endpoints, platform, interface, SafetyConfig(), logger=logger)
    service.start()
    print(f"vehicle agent up: platform={platform.name} scenario={scenario.name}")

    stop = []
    signal.signal(signal.SIGINT, lambda *a: stop.append(1))
    signal.signal(signal.SIGTERM, lambda *a: stop.append(1))
    try:
        while not stop:
            time.sleep(0.2)
    finally:
        service.stop()
        logger.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
