"""Community server: event-sourced state, REST API, scenario runner and CLI."""

from .eventlog import EventLog, EventRecord
from .service import CommunityService, replay

__all__ = ["EventLog", "EventRecord", "CommunityService", "replay"]
