"""Stream names and payload-type ids shared by both sides of the link."""

# payload_type values carried in the envelope header
PT_PRIMARY_COMMAND = 1
PT_SECONDARY_COMMAND = 2
PT_VEHICLE_STATE = 3
PT_TRAJECTORY = 4
PT_TRAJECTORY_ACK = 5
PT_HEARTBEAT = 6
PT_SYSTEM_STATUS = 7
PT_CONFIG = 8
PT_CLOCK_PROBE = 9
PT_OBJECTS = 10
PT_MAP = 11

# stream names used for channel configs, monitoring, and logs
STREAM_COMMAND = "command"
STREAM_SECONDARY = "secondary"
STREAM_TRAJECTORY = "trajectory"
STREAM_STATE = "state"
STREAM_STATUS = "status"
STREAM_HEARTBEAT = "heartbeat"
STREAM_CONFIG = "config"

# default cadences (Hz)
COMMAND_RATE_HZ = 50.0
STATE_RATE_HZ = 50.0
STATUS_RATE_HZ = 10.0
HEARTBEAT_RATE_HZ = 10.0
