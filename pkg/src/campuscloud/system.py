"""Composition root: one object owning all three levels, the event log, and
the single-writer contract.

Every mutation follows the same shape: plan (pure validation + everything
that will be assigned, including placement and derived randomness) ->
append one event (fsync-durable) -> apply (deterministic state transition
from the event alone) -> side effects (blob I/O, live only). Replay runs
just the apply stage over the log, so a replayed system reaches the exact
canonical state of the live one - that equality is this package's central
correctness property.

Reads run concurrently against state under a readers-writer lock; mutations
serialize through a writer mutex, and the log order is the mutation order.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from filelock import FileLock, Timeout

from . import core, datacenter, edu, events, provider
from .blobstore import DiskBlobStore, MemoryBlobStore
from .config import SystemConfig
from .core import Capability, CloudError, validation_error
from .datacenter import ClusterState, NodeState, ObjectState
from .edu import EduState
from .events import LOG_FILENAME, EventLog, EventLogEntry, SnapshotStore, read_log
from .placement import RendezvousPolicy
from .provider import AccountState, ProviderState, SessionState


class RWLock:
    """Many readers or one writer; writers wait for readers to drain."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    @contextmanager
    def read_locked(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write_locked(self):
        with self._cond:
            while self._writing or self._readers:
                self._cond.wait()
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


@dataclass
class StateBundle:
    """All mutable state of one system; what the digest covers (plus config)."""

    provider: ProviderState = field(default_factory=ProviderState)
    edu: EduState = field(default_factory=EduState)
    cluster: ClusterState = field(default_factory=ClusterState)

    def to_canonical(self, config: SystemConfig) -> dict:
        return {
            "cluster": self.cluster.to_canonical(),
            "config": config.digest_view(),
            "edu": self.edu.to_canonical(),
            "provider": self.provider.to_canonical(),
        }

    @classmethod
    def from_canonical(cls, doc: dict) -> "StateBundle":
        bundle = cls()
        c = doc["cluster"]
        bundle.cluster = ClusterState(
            next_node_seq=c["next_ids"]["node"],
            next_object_seq=c["next_ids"]["object"],
            tick=c["clock"]["tick"],
            nodes={
                nid: NodeState(
                    capacity_bytes=n["capacity_bytes"],
                    used_bytes=n["used_bytes"],
                    status=n["status"],
                    pending_unlink=list(n["pending_unlink"]),
                )
                for nid, n in c["nodes"].items()
            },
            objects={
                oid: ObjectState(
                    size_bytes=o["size_bytes"],
                    checksum=o["checksum"],
                    replicas=set(o["replicas"]),
                    created_at_tick=o["created_at_tick"],
                )
                for oid, o in c["objects"].items()
            },
            ledger=[(t, n, b) for t, n, b in c["ledger"]],
        )
        p = doc["provider"]
        bundle.provider = ProviderState(
            accounts={
                uid: AccountState(
                    roles=set(a["roles"]),
                    salt=a["salt"],
                    secret_hash=a["secret_hash"],
                    requested_services=set(a["requested_services"]),
                )
                for uid, a in p["accounts"].items()
            },
            sessions={
                tok: SessionState(
                    user_id=s["user_id"],
                    active_role=s["active_role"],
                    created_at_tick=s["created_at_tick"],
                    expired=s["expired"],
                )
                for tok, s in p["sessions"].items()
            },
            next_token_seq=p["next_ids"]["token"],
            next_salt_seq=p["next_ids"]["salt"],
        )
        e = doc["edu"]
        bundle.edu = EduState(
            students={uid: dict(v) for uid, v in e["students"].items()},
            staff={uid: dict(v) for uid, v in e["staff"].items()},
            assignments={aid: dict(v) for aid, v in e["assignments"].items()},
            materials={mid: dict(v) for mid, v in e["materials"].items()},
            submission_index={
                course: {owner: list(aids) for owner, aids in owners.items()}
                for course, owners in e["submission_index"].items()
            },
            next_assignment_seq=e["next_ids"]["assignment"],
            next_material_seq=e["next_ids"]["material"],
        )
        return bundle


def _apply_entry(bundle: StateBundle, entry: EventLogEntry) -> None:
    op = entry.op
    args = entry.payload["args"]
    assigned = entry.payload["assigned"]
    if entry.tick != bundle.cluster.tick:
        raise events.replay_error(
            entry.seq, f"entry tick {entry.tick} != state tick {bundle.cluster.tick}"
        )
    applier = APPLIERS.get(op)
    if applier is None:
        raise events.replay_error(entry.seq, f"unknown operation {op!r}")
    applier(bundle, args, assigned)


APPLIERS = {
    "add_node": lambda s, a, g: datacenter.apply_add_node(s.cluster, a, g),
    "set_node_status": lambda s, a, g: datacenter.apply_set_node_status(s.cluster, a, g),
    "rereplicate": lambda s, a, g: datacenter.apply_rereplicate(s.cluster, a, g),
    "advance_clock": lambda s, a, g: datacenter.apply_advance_clock(s.cluster, a, g),
    "create_account": lambda s, a, g: provider.apply_create_account(s.provider, a, g),
    "login": lambda s, a, g: provider.apply_login(s.provider, s.cluster.tick, a, g),
    "logout": lambda s, a, g: provider.apply_logout(s.provider, a, g),
    "switch_role": lambda s, a, g: provider.apply_switch_role(s.provider, a, g),
    "request_service": lambda s, a, g: provider.apply_request_service(s.provider, a, g),
    "insert_student": lambda s, a, g: edu.apply_insert_student(s.edu, s.cluster, a, g),
    "update_student": lambda s, a, g: edu.apply_update_student(s.edu, s.cluster, a, g),
    "submit_assignment": lambda s, a, g: edu.apply_submit_assignment(s.edu, s.cluster, a, g),
    "upload_material": lambda s, a, g: edu.apply_upload_material(s.edu, s.cluster, a, g),
    "record_grade": lambda s, a, g: edu.apply_record_grade(s.edu, a, g),
    "register_staff": lambda s, a, g: edu.apply_register_staff(s.edu, a, g),
}


class System:
    """One university cloud: data center + provider + user services."""

    def __init__(
        self,
        config: SystemConfig,
        blobs,
        log: EventLog,
        data_dir: Path | None = None,
        bundle: StateBundle | None = None,
        dir_lock: FileLock | None = None,
    ):
        self.config = config
        self.blobs = blobs
        self.log = log
        self.data_dir = data_dir
        self.state = bundle or StateBundle()
        self._policy = RendezvousPolicy()
        self._writer = threading.Lock()
        self._rw = RWLock()
        self._dir_lock = dir_lock
        self._snapshots = SnapshotStore(data_dir) if data_dir is not None else None

    # --- lifecycle -------------------------------------------------------------

    @classmethod
    def ephemeral(cls, config: SystemConfig | None = None) -> "System":
        cfg = config or SystemConfig(rng_seed="ephemeral")
        return cls(cfg, MemoryBlobStore(), EventLog(None, durability="none"))

    @classmethod
    def create(cls, data_dir: str | Path, config: SystemConfig) -> "System":
        data_dir = Path(data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        cfg_path = data_dir / "config.json"
        if cfg_path.exists() or (data_dir / LOG_FILENAME).exists():
            raise validation_error(f"{data_dir} already holds a system")
        config.save(cfg_path)
        lock = _acquire_dir_lock(data_dir)
        log = EventLog(data_dir / LOG_FILENAME, durability=config.durability)
        blobs = DiskBlobStore(data_dir / "nodes")
        return cls(config, blobs, log, data_dir=data_dir, dir_lock=lock)

    @classmethod
    def open(cls, data_dir: str | Path) -> "System":
        data_dir = Path(data_dir)
        config = SystemConfig.load(data_dir / "config.json")
        lock = _acquire_dir_lock(data_dir)
        try:
            log, entries, _report = EventLog.open_existing(
                data_dir / LOG_FILENAME, durability=config.durability
            )
            snapshots = SnapshotStore(data_dir)
            snap = snapshots.latest(max_seq=len(entries))
            if snap is not None:
                bundle = StateBundle.from_canonical(snap["state"])
                start = snap["seq"]
            else:
                bundle = StateBundle()
                start = 0
            for entry in entries[start:]:
                _apply_entry(bundle, entry)
        except Exception:
            lock.release()
            raise
        blobs = DiskBlobStore(data_dir / "nodes")
        return cls(config, blobs, log, data_dir=data_dir, bundle=bundle, dir_lock=lock)

    def close(self) -> None:
        self.log.close()
        if self._dir_lock is not None:
            self._dir_lock.release()
            self._dir_lock = None

    def __enter__(self) -> "System":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- mutation plumbing -------------------------------------------------------

    def _mutate(self, op: str, plan, effects=None) -> dict:
        with self._writer:
            args, assigned = plan()
            entry = self.log.make_entry(
                op, self.state.cluster.tick, {"args": args, "assigned": assigned}
            )
            self.log.append_entry(entry)
            with self._rw.write_locked():
                _apply_entry(self.state, entry)
            if effects is not None:
                effects(args, assigned)
            self._maybe_snapshot(entry.seq)
            return assigned

    def _maybe_snapshot(self, seq: int) -> None:
        if self._snapshots is None or self.config.snapshot_interval <= 0:
            return
        if seq % self.config.snapshot_interval == 0:
            self._snapshots.write(seq, self.canonical_state())

    def _edu_ctx(self) -> edu.EduContext:
        return edu.EduContext(
            provider=self.state.provider,
            edu=self.state.edu,
            cluster=self.state.cluster,
            capabilities_of=self.config.capabilities,
            policy=self._policy,
            autoscale=self.config.autoscale,
            replication=self.config.replication,
            max_upload_bytes=self.config.max_upload_bytes,
            session_expiry_ticks=self.config.session_expiry_ticks,
        )

    def _authorize(self, token: str | None, capability: Capability):
        return provider.authorize(
            self.state.provider,
            self.config.capabilities,
            token,
            capability,
            self.state.cluster.tick,
            self.config.session_expiry_ticks,
        )

    # --- digests and introspection --------------------------------------------------

    def canonical_state(self) -> dict:
        return self.state.to_canonical(self.config)

    def state_digest(self) -> str:
        with self._rw.read_locked():
            return core.state_digest(self.canonical_state())

    def audit(self) -> dict:
        with self._rw.read_locked():
            report = edu.audit_refs(self.state.edu, self.state.cluster)
            datacenter.check_conservation(self.state.cluster)
            return report

    # --- provider operations ----------------------------------------------------------

    def create_account(self, token: str | None, user_id: str, roles: list[str], secret: str) -> dict:
        def plan():
            self._authorize(token, Capability.ADMIN_ACCOUNTS)
            args, assigned = provider.plan_create_account(
                self.state.provider, self.config.rng_seed, user_id, roles, secret
            )
            args["token"] = token
            return args, assigned

        self._mutate("create_account", plan)
        return {"roles": sorted(roles), "user_id": user_id}

    def bootstrap_account(self, user_id: str, roles: list[str], secret: str) -> dict:
        """Create an account with no acting session; used by system init."""

        def plan():
            args, assigned = provider.plan_create_account(
                self.state.provider, self.config.rng_seed, user_id, roles, secret
            )
            args["token"] = None
            return args, assigned

        self._mutate("create_account", plan)
        return {"roles": sorted(roles), "user_id": user_id}

    def login(self, user_id: str, secret: str, role: str | None = None) -> dict:
        def plan():
            return provider.plan_login(
                self.state.provider, self.config.rng_seed, user_id, secret, role
            )

        assigned = self._mutate("login", plan)
        account = self.state.provider.accounts[user_id]
        return {
            "active_role": assigned["active_role"],
            "roles": sorted(account.roles),
            "token": assigned["token"],
            "user_id": user_id,
        }

    def logout(self, token: str | None) -> dict:
        def plan():
            return provider.plan_logout(
                self.state.provider, token, self.state.cluster.tick,
                self.config.session_expiry_ticks,
            )

        self._mutate("logout", plan)
        return {"ok": True}

    def switch_role(self, token: str | None, role: str) -> dict:
        def plan():
            return provider.plan_switch_role(
                self.state.provider, token, role, self.state.cluster.tick,
                self.config.session_expiry_ticks,
            )

        self._mutate("switch_role", plan)
        return {"active_role": role}

    def authorize_query(self, token: str | None, capability: Capability) -> dict:
        with self._rw.read_locked():
            return provider.authorize_query(
                self.state.provider, self.config.capabilities, token, capability,
                self.state.cluster.tick, self.config.session_expiry_ticks,
            )

    def request_service(self, token: str | None, service_id: str) -> dict:
        def plan():
            return provider.plan_request_service(
                self.state.provider, self.config.capabilities, self.config.catalog,
                token, service_id, self.state.cluster.tick, self.config.session_expiry_ticks,
            )

        assigned = self._mutate("request_service", plan)
        requested = self.state.provider.accounts[assigned["user_id"]].requested_services
        return {"requested": sorted(requested)}

    def list_entitled_services(self, token: str | None) -> list[dict]:
        with self._rw.read_locked():
            return provider.list_entitled_services(
                self.state.provider, self.config.capabilities, self.config.catalog,
                token, self.state.cluster.tick, self.config.session_expiry_ticks,
            )

    # --- data center operations ----------------------------------------------------------

    def add_node(self, token: str | None, capacity_bytes: int) -> dict:
        def plan():
            self._authorize(token, Capability.ADMIN_NODE_OPS)
            assigned = datacenter.plan_add_node(self.state.cluster, capacity_bytes)
            return {"capacity_bytes": capacity_bytes, "token": token}, assigned

        assigned = self._mutate("add_node", plan)
        return {"node_id": assigned["node_id"]}

    def set_node_status(self, token: str | None, node_id: str, status: str) -> dict:
        def plan():
            self._authorize(token, Capability.ADMIN_NODE_OPS)
            assigned = datacenter.plan_set_node_status(self.state.cluster, node_id, status)
            return {"node_id": node_id, "status": status, "token": token}, assigned

        def effects(args, assigned):
            if status == datacenter.NODE_UP:
                datacenter.effects_set_node_status(self.blobs, args, assigned)

        self._mutate("set_node_status", plan, effects)
        return {"node_id": node_id, "status": status}

    def rereplicate(self, token: str | None) -> dict:
        def plan():
            self._authorize(token, Capability.ADMIN_NODE_OPS)
            assigned = datacenter.plan_rereplicate(
                self.state.cluster, self.config.replication, self._policy
            )
            return {"token": token}, assigned

        def effects(args, assigned):
            datacenter.effects_rereplicate(self.blobs, assigned)

        assigned = self._mutate("rereplicate", plan, effects)
        return {
            "degraded": assigned["degraded"],
            "repaired": assigned["repaired"],
            "trimmed": sum(len(v) for v in assigned["removed"].values()),
        }

    def advance_clock(self, token: str | None, ticks: int) -> dict:
        def plan():
            self._authorize(token, Capability.ADMIN_CLOCK)
            assigned = datacenter.plan_advance_clock(self.state.cluster, ticks)
            return {"ticks": ticks, "token": token}, assigned

        self._mutate("advance_clock", plan)
        return {"tick": self.state.cluster.tick}

    def usage_report(self, token: str | None, from_tick: int, to_tick: int) -> dict:
        with self._rw.read_locked():
            self._authorize(token, Capability.ADMIN_BILLING)
            return datacenter.usage_report(self.state.cluster, from_tick, to_tick)

    def compute_bill(self, token: str | None, from_tick: int, to_tick: int) -> dict:
        with self._rw.read_locked():
            self._authorize(token, Capability.ADMIN_BILLING)
            usage = datacenter.usage_report(self.state.cluster, from_tick, to_tick)
            return provider.billing_statement(usage, self.config.rate_micro_per_mib_tick)

    def health(self) -> dict:
        with self._rw.read_locked():
            return datacenter.health(self.state.cluster, self.config.replication)

    # --- edu operations ---------------------------------------------------------------------

    def insert_student(self, token: str | None, fields: dict) -> dict:
        def plan():
            return edu.plan_insert_student(self._edu_ctx(), token, fields)

        def effects(args, assigned):
            edu.effects_insert_student(self.blobs, args, assigned)

        assigned = self._mutate("insert_student", plan, effects)
        return {"user_id": fields["user_id"], "version": 1}

    def retrieve_student(self, token: str | None, user_id: str) -> dict:
        with self._rw.read_locked():
            return edu.retrieve_student(self._edu_ctx(), self.blobs, token, user_id)

    def retrieve_student_self(self, token: str | None) -> dict:
        with self._rw.read_locked():
            ctx = self._edu_ctx()
            session = ctx.session(token)
            return edu.retrieve_student(ctx, self.blobs, token, session.user_id)

    def update_student(self, token: str | None, user_id: str, patch: dict) -> dict:
        def plan():
            return edu.plan_update_student(self._edu_ctx(), self.blobs, token, user_id, patch)

        def effects(args, assigned):
            edu.effects_update_student(self.blobs, args, assigned)

        assigned = self._mutate("update_student", plan, effects)
        return {"user_id": user_id, "version": assigned["version"]}

    def submit_assignment(self, token: str | None, course: str, payload: bytes) -> dict:
        def plan():
            return edu.plan_submit_assignment(self._edu_ctx(), token, course, payload)

        def effects(args, assigned):
            datacenter.effects_put(self.blobs, payload, assigned["put"])

        assigned = self._mutate("submit_assignment", plan, effects)
        meta = self.state.edu.assignments[assigned["assignment_id"]]
        return {
            "assignment_id": assigned["assignment_id"],
            "course": course,
            "size_bytes": len(payload),
            "submitted_at_tick": meta["submitted_at_tick"],
        }

    def list_submissions(self, token: str | None, course: str) -> list[dict]:
        with self._rw.read_locked():
            return edu.list_submissions(self._edu_ctx(), token, course)

    def record_grade(self, token: str | None, assignment_id: str, grade: str) -> dict:
        def plan():
            return edu.plan_record_grade(self._edu_ctx(), token, assignment_id, grade)

        self._mutate("record_grade", plan)
        return {"assignment_id": assignment_id, "grade": grade}

    def upload_material(self, token: str | None, course: str, payload: bytes) -> dict:
        def plan():
            return edu.plan_upload_material(self._edu_ctx(), token, course, payload)

        def effects(args, assigned):
            datacenter.effects_put(self.blobs, payload, assigned["put"])

        assigned = self._mutate("upload_material", plan, effects)
        return {
            "course": course,
            "material_id": assigned["material_id"],
            "size_bytes": len(payload),
        }

    def download_material(self, token: str | None, course: str, material_id: str) -> bytes:
        with self._rw.read_locked():
            return edu.download_material(self._edu_ctx(), self.blobs, token, course, material_id)

    def register_staff(self, token: str | None, fields: dict) -> dict:
        def plan():
            return edu.plan_register_staff(self._edu_ctx(), token, fields)

        self._mutate("register_staff", plan)
        return {"user_id": fields["user_id"]}


def _acquire_dir_lock(data_dir: Path) -> FileLock:
    lock = FileLock(str(data_dir / ".lock"))
    try:
        lock.acquire(timeout=1)
    except Timeout:
        raise validation_error(
            f"data directory {data_dir} is locked by another writer"
        ) from None
    return lock


# --- replay -----------------------------------------------------------------------------------


def replay_entries(config: SystemConfig, entries: list[EventLogEntry]):
    """Apply entries to a fresh state, yielding (seq, bundle) after each."""
    bundle = StateBundle()
    yield 0, bundle
    for entry in entries:
        _apply_entry(bundle, entry)
        yield entry.seq, bundle


def replay_digest(config: SystemConfig, entries: list[EventLogEntry], upto: int | None = None) -> str:
    bundle = StateBundle()
    for entry in entries:
        if upto is not None and entry.seq > upto:
            break
        _apply_entry(bundle, entry)
    return core.state_digest(bundle.to_canonical(config))


def verify_replay(data_dir: str | Path) -> dict:
    """Replay a data directory's log from genesis and cross-check snapshots.

    Returns a report; ``ok`` is False on any chain break, undecodable or
    out-of-order entry, digest mismatch at a snapshot boundary, or a torn
    final line. Whole-entry tail truncation (snapshots newer than the log)
    is tolerated and reported.
    """
    data_dir = Path(data_dir)
    config = SystemConfig.load(data_dir / "config.json")
    snapshots = SnapshotStore(data_dir)
    report = {
        "entries": 0,
        "error": None,
        "final_digest": None,
        "ok": True,
        "snapshots_checked": 0,
        "truncated_tail": False,
    }
    try:
        entries, _tail = read_log(data_dir / LOG_FILENAME, recover=False)
        snap_seqs = set(snapshots.seqs())
        report["entries"] = len(entries)
        final = None
        for seq, bundle in replay_entries(config, entries):
            final = bundle
            if seq in snap_seqs:
                doc = snapshots.load(seq)
                digest = core.state_digest(bundle.to_canonical(config))
                if digest != doc["state_digest"]:
                    raise events.replay_error(
                        seq, f"replay digest {digest} != snapshot digest {doc['state_digest']}"
                    )
                rebuilt = StateBundle.from_canonical(doc["state"])
                if core.state_digest(rebuilt.to_canonical(config)) != digest:
                    raise events.replay_error(seq, "snapshot state does not rebuild to its digest")
                report["snapshots_checked"] += 1
        report["final_digest"] = core.state_digest(final.to_canonical(config))
        if any(s > len(entries) for s in snap_seqs):
            report["truncated_tail"] = True
    except CloudError as err:
        report["ok"] = False
        report["error"] = err.message
    return report
