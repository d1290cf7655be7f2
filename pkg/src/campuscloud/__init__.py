"""campuscloud: a simulated university cloud.

Three levels behind one wire API: a replicated, metered, fault-tolerant
storage data center; a provider layer with sessions, roles, a service
catalog and billing; and student/staff services on top. Every mutation is
event-sourced, so the whole system replays deterministically.
"""

from .config import SystemConfig
from .core import Capability, CloudError, ErrorCode, Role
from .system import System, verify_replay

__all__ = [
    "Capability",
    "CloudError",
    "ErrorCode",
    "Role",
    "System",
    "SystemConfig",
    "verify_replay",
]

__version__ = "0.1.0"
