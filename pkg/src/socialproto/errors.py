"""Engine error type shared by every module.

Every rejected operation raises EngineError with a stable machine-readable
code; the server maps each code to exactly one HTTP status.
"""

from __future__ import annotations

from typing import Any


class EngineError(Exception):
    """Operation rejected by the engine, carrying a stable error code."""

    def __init__(self, code: str, message: str, **details: Any) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}
