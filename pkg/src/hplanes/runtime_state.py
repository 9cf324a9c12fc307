import datetime
import threading
import typing as t


class RuntimeState:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._command: str | None = None
        self._command_time: datetime.datetime | None = None
        self._stage: int | None = None
        self._stage_radius: float | None = None
        self._stage_time: datetime.datetime | None = None
        self._last_solve_topology: str | None = None
        self._last_solve_outcome: str | None = None
        self._last_solve_time: datetime.datetime | None = None
        self._last_error: str | None = None
        self._last_error_time: datetime.datetime | None = None

    def record_command_start(self, command: str) -> None:
        now = datetime.datetime.now(datetime.UTC)
        with self._lock:
            self._command = command
            self._command_time = now
            self._stage = None
            self._stage_radius = None
            self._stage_time = None
            self._last_error = None
            self._last_error_time = None

    def record_stage(self, stage: int, radius: float) -> None:
        now = datetime.datetime.now(datetime.UTC)
        with self._lock:
            self._stage = stage
            self._stage_radius = radius
            self._stage_time = now

    def record_solve(self, topology: str, outcome: str) -> None:
        now = datetime.datetime.now(datetime.UTC)
        with self._lock:
            self._last_solve_topology = topology
            self._last_solve_outcome = outcome
            self._last_solve_time = now

    def record_error(self, message: str) -> None:
        now = datetime.datetime.now(datetime.UTC)
        with self._lock:
            self._last_error = message
            self._last_error_time = now

    def snapshot(self) -> dict[str, t.Any]:
        with self._lock:
            return {
                'command': self._command,
                'command_time': self._command_time,
                'stage': self._stage,
                'stage_radius': self._stage_radius,
                'stage_time': self._stage_time,
                'last_solve_topology': self._last_solve_topology,
                'last_solve_outcome': self._last_solve_outcome,
                'last_solve_time': self._last_solve_time,
                'last_error': self._last_error,
                'last_error_time': self._last_error_time,
            }


runtime_state = RuntimeState()
