"""Desk-scale teleoperation stack for ground vehicles.

Operator station and vehicle agent linked by UDP/TCP channels, coupled
session state machines, link/stream monitoring, a safety gate, and two
remote-driving modes (direct control and trajectory guidance), exercised
against a simulated vehicle and a latency/tracking experiment harness.
"""

__version__ = "0.1.0"
