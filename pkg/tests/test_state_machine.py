from __future__ import annotations

import pytest

from teleop.state_machine import (
    Heartbeat,
    HeartbeatVerdict,
    InvalidTransition,
    OperatorState,
    SmEvent,
    StateMachineHost,
    VehicleSmState,
    evaluate_heartbeats,
    operator_transition,
    vehicle_transition,
)

# Independent re-derivation of both transition tables, used as the
# enumeration oracle: anything not listed must be invalid.
OPERATOR_ORACLE = {
    ("IDLE", "Connect"): "UPLINK",
    ("UPLINK", "StartTeleoperation"): "TELEOPERATION",
    ("TELEOPERATION", "StopTeleoperation"): "UPLINK",
    ("UPLINK", "Disconnect"): "IDLE",
    ("TELEOPERATION", "Disconnect"): "IDLE",
    ("UPLINK", "HeartbeatLost"): "IDLE",
    ("TELEOPERATION", "HeartbeatLost"): "IDLE",
}

VEHICLE_ORACLE = {
    ("IDLE", "Connect"): "UPLINK",
    ("UPLINK", "Disconnect"): "IDLE",
    ("UPLINK", "HeartbeatLost"): "IDLE",
}


class TestOperatorTable:
    def test_connect_from_idle(self):
        assert operator_transition(OperatorState.IDLE, SmEvent.CONNECT) is OperatorState.UPLINK

    def test_cannot_teleoperate_unconnected(self):
        with pytest.raises(InvalidTransition):
            operator_transition(OperatorState.IDLE, SmEvent.START_TELEOPERATION)

    def test_heartbeat_loss_sinks_to_idle(self):
        # exhaustive check below confirms IDLE is the only heartbeat-loss sink
        assert operator_transition(OperatorState.TELEOPERATION, SmEvent.HEARTBEAT_LOST) is OperatorState.IDLE
        assert operator_transition(OperatorState.UPLINK, SmEvent.HEARTBEAT_LOST) is OperatorState.IDLE

    def test_exhaustive_enumeration_matches_oracle(self):
        for state in OperatorState:
            for event in SmEvent:
                expected = OPERATOR_ORACLE.get((state.value, event.value))
                if expected is None:
                    with pytest.raises(InvalidTransition):
                        operator_transition(state, event)
                else:
                    assert operator_transition(state, event).value == expected


class TestVehicleTable:
    def test_connect_from_idle(self):
        assert vehicle_transition(VehicleSmState.IDLE, SmEvent.CONNECT) is VehicleSmState.UPLINK

    def test_heartbeat_lost_from_uplink(self):
        assert vehicle_transition(VehicleSmState.UPLINK, SmEvent.HEARTBEAT_LOST) is VehicleSmState.IDLE

    def test_operator_side_events_invalid(self):
        with pytest.raises(InvalidTransition):
            vehicle_transition(VehicleSmState.IDLE, SmEvent.STOP_TELEOPERATION)
        with pytest.raises(InvalidTransition):
            vehicle_transition(VehicleSmState.UPLINK, SmEvent.START_TELEOPERATION)

    def test_exhaustive_enumeration_matches_oracle(self):
        for state in VehicleSmState:
            for event in SmEvent:
                expected = VEHICLE_ORACLE.get((state.value, event.value))
                if expected is None:
                    with pytest.raises(InvalidTransition):
                        vehicle_transition(state, event)
                else:
                    assert vehicle_transition(state, event).value == expected


class TestHeartbeatEvaluation:
    def test_alive_within_timeout(self):
        assert evaluate_heartbeats(0, int(100e6), 500.0) is HeartbeatVerdict.ALIVE

    def test_lost_past_timeout(self):
        assert evaluate_heartbeats(0, int(501e6), 500.0) is HeartbeatVerdict.LOST

    def test_exact_boundary_is_alive(self):
        # strict inequality convention
        assert evaluate_heartbeats(0, int(500e6), 500.0) is HeartbeatVerdict.ALIVE

    def test_zero_timeout_rejected(self):
        with pytest.raises(ValueError):
            evaluate_heartbeats(0, 1, 0.0)


class TestHeartbeatPayload:
    def test_round_trip(self):
        hb = Heartbeat("TELEOPERATION", 123456, 42, teleoperation_active=True, concept="direct")
        assert Heartbeat.decode(hb.encode()) == hb

    def test_defaults(self):
        hb = Heartbeat("UPLINK", 1, 2)
        decoded = Heartbeat.decode(hb.encode())
        assert decoded.teleoperation_active is False
        assert decoded.concept is None


class TestStateMachineHost:
    def test_snapshot_reads_post_transition_state(self):
        host = StateMachineHost(operator_transition, OperatorState.IDLE)
        assert host.state is OperatorState.IDLE
        host.apply(SmEvent.CONNECT)
        assert host.state is OperatorState.UPLINK

    def test_try_apply_keeps_state_on_invalid(self):
        host = StateMachineHost(vehicle_transition, VehicleSmState.IDLE)
        state, applied = host.try_apply(SmEvent.DISCONNECT)
        assert state is VehicleSmState.IDLE
        assert not applied
