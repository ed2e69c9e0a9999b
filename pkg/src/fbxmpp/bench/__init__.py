"""Payload, latency and memory-stability measurements."""

from .measure import (LatencyResult, PayloadResult, SpotCheck, measure_latency, measure_payload,
                      spot_check_accounting)
from .rig import PATTERNS, TRANSPORTS, Rig, RigError
