"""Multi-user interactive power-system operations simulator.

Core pieces: a quasi-steady-state AC power-flow engine, a geomagnetic
disturbance overlay, an in-process publish/subscribe bus, a role-based
command gateway with a WebSocket bridge, and deterministic session
record/replay.
"""

__version__ = "0.1.0"
