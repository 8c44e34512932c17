"""teleop-station: run the operator-side daemon with the UI gateway."""

from __future__ import annotations

import argparse
import signal
import sys
import time
from pathlib import Path

from teleop.domain import Concept, PlatformConfig
from teleop.endpoints import EndpointConfig
from teleop.operator_station.station import OperatorStation, SessionError
from teleop.operator_station.ui_gateway import UiGateway
from teleop.runlog import NullLogger, RunLogger, create_run_dir


def _parse_bind(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleop-station", description=__doc__)
    parser.add_argument("--vehicle-endpoints", type=Path, required=True, help="endpoint config file")
    parser.add_argument("--ui-bind", type=_parse_bind, default=("127.0.0.1", 8765), metavar="ADDR:PORT")
    parser.add_argument("--concept", choices=["direct", "trajectory"], default="direct")
    parser.add_argument("--platform-config", type=Path, required=True)
    parser.add_argument("--log-dir", type=Path, default=None)
    parser.add_argument("--connect", action="store_true", help="connect to the vehicle immediately")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    endpoints = EndpointConfig.load(args.vehicle_endpoints)
    platform = PlatformConfig.load(args.platform_config)
    logger = NullLogger()
    if args.log_dir is not None:
        run_dir = create_run_dir(args.log_dir, manifest={"role": "operator", "platform": platform.name})
        logger = RunLogger(run_dir / "operator.log", "operator")
    station = OperatorStation(endpoints, platform, concept=Concept(args.concept), logger=logger)
    gateway = UiGateway(station, bind=args.ui_bind)
    host, port = gateway.start()
    print(f"UI gateway listening on ws://{host}:{port}")
    if args.connect:
        try:
            station.connect()
            print("connected; operator state:", station.operator_state.value)
        except SessionError as err:
            print(f"connect failed: {err}", file=sys.stderr)

    stop = []
    signal.signal(signal.SIGINT, lambda *a: stop.append(1))
    signal.signal(signal.SIGTERM, lambda *a: stop.append(1))
    try:
        while not stop:
            time.sleep(0.2)
    finally:
        gateway.stop()
        station.close()
        logger.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
