"""Timestamp-based execution control for a deterministic mini-VM."""

import json as _json

from ._core import (
    ENCODED_INCTS_SIZE,
    Program,
    ProtocolEndpoint,
    Session,
    TsdbgError,
    assemble,
    deserialize,
    instrument,
    load_program,
    run,
    trace,
    verify_instrumentation,
)

__all__ = [
    "ENCODED_INCTS_SIZE",
    "Program",
    "ProtocolClient",
    "ProtocolEndpoint",
    "Session",
    "TsdbgError",
    "assemble",
    "deserialize",
    "instrument",
    "load_program",
    "run",
    "trace",
    "verify_instrumentation",
]


class ProtocolClient:
    """Speaks the JSON-lines debug protocol to an in-process endpoint."""

    def __init__(self, program, input=(), budget=100_000_000):
        self._endpoint = ProtocolEndpoint(program, list(input), budget)
        self._next_id = 1

    def request(self, cmd, **args):
        """Returns (response, events) for one command."""
        msg = {"id": self._next_id, "cmd": cmd, "args": args}
        self._next_id += 1
        replies = [_json.loads(line) for line in self._endpoint.handle(_json.dumps(msg))]
        response = next(r for r in replies if "id" in r)
        events = [r for r in replies if "type" in r]
        return response, events
