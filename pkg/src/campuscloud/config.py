"""System configuration: replication, autoscaling bounds, billing rate,
the static capability table, and the service catalog.

Loaded once at startup from ``config.json`` (canonical JSON) in the data
directory; the capability table and catalog are fixed for the life of the
process so the authorization matrix stays exhaustively testable.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field
from pathlib import Path

from .core import Capability, Role, canonical_bytes, validation_error
from .datacenter import AutoscaleConfig

DEFAULT_CAPABILITY_TABLE: dict[str, tuple[str, ...]] = {
    Role.STUDENT.value: (
        Capability.STUDENT_READ_SELF.value,
        Capability.STUDENT_UPDATE_SELF.value,
        Capability.ASSIGNMENT_SUBMIT.value,
        Capability.MATERIAL_DOWNLOAD.value,
        Capability.SERVICE_REQUEST.value,
    ),
    Role.STAFF.value: (
        Capability.STUDENT_INSERT.value,
        Capability.STUDENT_RETRIEVE_ANY.value,
        Capability.STUDENT_UPDATE_ANY.value,
        Capability.MATERIAL_UPLOAD.value,
        Capability.MATERIAL_DOWNLOAD.value,
        Capability.SUBMISSION_LIST.value,
        Capability.GRADE_RECORD.value,
        Capability.SERVICE_REQUEST.value,
    ),
    Role.ADMIN.value: (
        Capability.ADMIN_NODE_OPS.value,
        Capability.ADMIN_BILLING.value,
        Capability.ADMIN_ACCOUNTS.value,
        Capability.ADMIN_CLOCK.value,
    ),
}

DEFAULT_CATALOG: dict[str, str] = {
    "matlab-saas": "MATLAB numerical computing, hosted",
    "spss-saas": "SPSS statistics suite, hosted",
    "lms-saas": "Learning management system",
    "mail-saas": "Institutional e-mail",
}


@dataclass
class SystemConfig:
    replication: int = 2
    autoscale_enabled: bool = False
    autoscale_node_capacity_bytes: int = 1 << 30
    max_nodes: int = 64
    rate_micro_per_mib_tick: int = 1
    max_upload_bytes: int = 32 * (1 << 20)
    session_expiry_ticks: int | None = None
    snapshot_interval: int = 1000
    durability: str = "fsync"
    rng_seed: str = ""
    capability_table: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CAPABILITY_TABLE)
    )
    catalog: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CATALOG))

    def __post_init__(self):
        if not 1 <= self.replication <= 5:
            raise validation_error("replication factor must be in 1..5")
        if self.max_nodes < 1:
            raise validation_error("max_nodes must be >= 1")
        if self.rate_micro_per_mib_tick < 0:
            raise validation_error("billing rate must be >= 0")
        if self.durability not in ("fsync", "flush", "none"):
            raise validation_error("durability must be fsync, flush or none")
        for role in self.capability_table:
            Role(role)
        for caps in self.capability_table.values():
            for cap in caps:
                Capability(cap)
        if not self.rng_seed:
            self.rng_seed = secrets.token_hex(32)

    @property
    def autoscale(self) -> AutoscaleConfig:
        return AutoscaleConfig(
            enabled=self.autoscale_enabled,
            node_capacity_bytes=self.autoscale_node_capacity_bytes,
            max_nodes=self.max_nodes,
        )

    def capabilities(self, role: str) -> frozenset[str]:
        return frozenset(self.capability_table.get(role, ()))

    def to_dict(self) -> dict:
        return {
            "autoscale_enabled": self.autoscale_enabled,
            "autoscale_node_capacity_bytes": self.autoscale_node_capacity_bytes,
            "capability_table": {r: sorted(c) for r, c in self.capability_table.items()},
            "catalog": dict(self.catalog),
            "durability": self.durability,
            "max_nodes": self.max_nodes,
            "max_upload_bytes": self.max_upload_bytes,
            "rate_micro_per_mib_tick": self.rate_micro_per_mib_tick,
            "replication": self.replication,
            "rng_seed": self.rng_seed,
            "session_expiry_ticks": self.session_expiry_ticks,
            "snapshot_interval": self.snapshot_interval,
        }

    def digest_view(self) -> dict:
        """The config fields covered by the state digest.

        Operational knobs (rng seed, snapshot cadence, durability) are
        excluded: they affect how the system runs, not what state it is in.
        """
        return {
            "autoscale_enabled": self.autoscale_enabled,
            "autoscale_node_capacity_bytes": self.autoscale_node_capacity_bytes,
            "capability_table": {r: sorted(c) for r, c in self.capability_table.items()},
            "catalog": dict(self.catalog),
            "max_nodes": self.max_nodes,
            "max_upload_bytes": self.max_upload_bytes,
            "rate_micro_per_mib_tick": self.rate_micro_per_mib_tick,
            "replication": self.replication,
            "session_expiry_ticks": self.session_expiry_ticks,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise validation_error(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "capability_table" in kwargs:
            kwargs["capability_table"] = {
                role: tuple(caps) for role, caps in kwargs["capability_table"].items()
            }
        return cls(**kwargs)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(canonical_bytes(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "SystemConfig":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))
