"""Simulated storage data center: nodes, replicated objects, failures,
autoscaling, and pay-per-use metering on a logical clock.

Every mutation is split into a *planner* (pure: reads state, validates,
computes everything that will change, including ids assigned and replicas
chosen) and an *applier* (deterministic state transition driven only by the
planner's output). The live system runs planner -> log -> applier; replay
runs the applier alone, so replayed state is bit-identical by construction.
Payload bytes are side effects handled by a blob store, never state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .blobstore import MemoryBlobStore
from .core import CloudError, ErrorCode, sha256_hex, validation_error
from .placement import CandidateNode, PlacementPolicy, RendezvousPolicy, capacity_shortage, place

NODE_UP = "Up"
NODE_DOWN = "Down"

MIB = kernels.MIB


def node_order(node_id: str) -> int:
    """Numeric ordering for ids of the form n<seq>; n2 sorts before n10."""
    return int(node_id[1:])


def object_order(object_id: str) -> int:
    return int(object_id.split("-", 1)[1])


@dataclass
class NodeState:
    capacity_bytes: int
    used_bytes: int = 0
    status: str = NODE_UP
    # Object ids whose files still sit on this node while it is Down but
    # whose replicas are already unregistered; unlinked on recovery.
    pending_unlink: list[str] = field(default_factory=list)

    def to_canonical(self) -> dict:
        return {
            "capacity_bytes": self.capacity_bytes,
            "pending_unlink": sorted(self.pending_unlink),
            "status": self.status,
            "used_bytes": self.used_bytes,
        }


@dataclass
class ObjectState:
    size_bytes: int
    checksum: str
    replicas: set[str] = field(default_factory=set)
    created_at_tick: int = 0

    def to_canonical(self) -> dict:
        return {
            "checksum": self.checksum,
            "created_at_tick": self.created_at_tick,
            "replicas": sorted(self.replicas),
            "size_bytes": self.size_bytes,
        }


@dataclass
class ClusterState:
    next_node_seq: int = 1
    next_object_seq: int = 1
    tick: int = 0
    nodes: dict[str, NodeState] = field(default_factory=dict)
    objects: dict[str, ObjectState] = field(default_factory=dict)
    # Append-only usage ledger: (tick, node_id, bytes stored on that node).
    ledger: list[tuple[int, str, int]] = field(default_factory=list)

    def to_canonical(self) -> dict:
        return {
            "clock": {"tick": self.tick},
            "ledger": [[t, n, b] for t, n, b in self.ledger],
            "next_ids": {"node": self.next_node_seq, "object": self.next_object_seq},
            "nodes": {nid: n.to_canonical() for nid, n in self.nodes.items()},
            "objects": {oid: o.to_canonical() for oid, o in self.objects.items()},
        }

    def up_nodes(self) -> list[str]:
        return sorted((n for n, s in self.nodes.items() if s.status == NODE_UP), key=node_order)

    def live_replicas(self, object_id: str) -> list[str]:
        obj = self.objects[object_id]
        return sorted(
            (n for n in obj.replicas if self.nodes[n].status == NODE_UP), key=node_order
        )

    def candidates(self, extra_free: dict[str, int] | None = None) -> list[CandidateNode]:
        out = []
        for nid, node in self.nodes.items():
            free = node.capacity_bytes - node.used_bytes
            if extra_free:
                free += extra_free.get(nid, 0)
            out.append(CandidateNode(node_id=nid, free_bytes=free, up=node.status == NODE_UP))
        return out


@dataclass(frozen=True)
class AutoscaleConfig:
    enabled: bool = False
    node_capacity_bytes: int = 1 << 30
    max_nodes: int = 64


# --- add_node -----------------------------------------------------------------


def plan_add_node(state: ClusterState, capacity_bytes: int) -> dict:
    if not isinstance(capacity_bytes, int) or isinstance(capacity_bytes, bool) or capacity_bytes <= 0:
        raise validation_error("node capacity must be a positive integer of bytes")
    return {"node_id": f"n{state.next_node_seq}"}


def apply_add_node(state: ClusterState, args: dict, assigned: dict) -> None:
    node_id = assigned["node_id"]
    if node_id != f"n{state.next_node_seq}":
        raise CloudError(ErrorCode.REPLAY_ERROR, f"node id {node_id} out of sequence")
    state.nodes[node_id] = NodeState(capacity_bytes=args["capacity_bytes"])
    state.next_node_seq += 1


# --- set_node_status ----------------------------------------------------------


def plan_set_node_status(state: ClusterState, node_id: str, status: str) -> dict:
    if status not in (NODE_UP, NODE_DOWN):
        raise validation_error(f"status must be '{NODE_UP}' or '{NODE_DOWN}'")
    node = state.nodes.get(node_id)
    if node is None:
        raise CloudError(ErrorCode.NOT_FOUND, f"no such node {node_id}")
    unlinked = sorted(node.pending_unlink) if status == NODE_UP else []
    return {"unlinked": unlinked}


def apply_set_node_status(state: ClusterState, args: dict, assigned: dict) -> None:
    node = state.nodes[args["node_id"]]
    node.status = args["status"]
    if args["status"] == NODE_UP:
        node.pending_unlink = []


def effects_set_node_status(blobs, args: dict, assigned: dict) -> None:
    # Deferred deletions reconcile when the node comes back.
    for object_id in assigned["unlinked"]:
        blobs.unlink(args["node_id"], object_id)


# --- put ------------------------------------------------------------------------


def plan_put(
    state: ClusterState,
    autoscale: AutoscaleConfig,
    size_bytes: int,
    checksum: str,
    r: int,
    policy: PlacementPolicy,
) -> dict:
    """Choose an object id and replica set, autoscaling when placement fails.

    Autoscale is simulated during planning: hypothetical nodes extend the
    candidate list and are recorded in ``nodes_added`` so the applier (and
    replay) can create them with the exact same ids.
    """
    if not isinstance(size_bytes, int) or isinstance(size_bytes, bool) or size_bytes <= 0:
        raise validation_error("object size must be a positive integer of bytes")
    if not isinstance(r, int) or r < 1:
        raise validation_error("replica count must be an integer >= 1")
    object_id = f"obj-{state.next_object_seq}"
    added: list[dict] = []
    candidates = state.candidates()
    while True:
        try:
            plan = place(object_id, size_bytes, r, candidates, policy)
            break
        except CloudError as err:
            if err.code is not ErrorCode.INSUFFICIENT_NODES:
                raise
            can_grow = autoscale.enabled and len(state.nodes) + len(added) < autoscale.max_nodes
            if not can_grow:
                if capacity_shortage(err):
                    raise CloudError(ErrorCode.CAPACITY_EXCEEDED, err.message)
                raise
            new_id = f"n{state.next_node_seq + len(added)}"
            added.append({"capacity_bytes": autoscale.node_capacity_bytes, "node_id": new_id})
            candidates.append(
                CandidateNode(node_id=new_id, free_bytes=autoscale.node_capacity_bytes, up=True)
            )
    return {
        "checksum": checksum,
        "nodes_added": added,
        "object_id": object_id,
        "replicas": list(plan.replicas),
        "size_bytes": size_bytes,
    }


def apply_put(state: ClusterState, args: dict, assigned: dict) -> None:
    for spec in assigned["nodes_added"]:
        apply_add_node(state, {"capacity_bytes": spec["capacity_bytes"]}, {"node_id": spec["node_id"]})
    object_id = assigned["object_id"]
    if object_id != f"obj-{state.next_object_seq}":
        raise CloudError(ErrorCode.REPLAY_ERROR, f"object id {object_id} out of sequence")
    size = assigned["size_bytes"]
    obj = ObjectState(
        size_bytes=size,
        checksum=assigned["checksum"],
        replicas=set(assigned["replicas"]),
        created_at_tick=state.tick,
    )
    for node_id in assigned["replicas"]:
        node = state.nodes[node_id]
        if node.used_bytes + size > node.capacity_bytes:
            raise CloudError(ErrorCode.REPLAY_ERROR, f"replica overflows node {node_id}")
        node.used_bytes += size
    state.objects[object_id] = obj
    state.next_object_seq += 1


def effects_put(blobs, payload: bytes, assigned: dict) -> None:
    for node_id in assigned["replicas"]:
        blobs.write(node_id, assigned["object_id"], payload)


# --- delete ---------------------------------------------------------------------


def plan_delete(state: ClusterState, object_id: str) -> dict:
    obj = state.objects.get(object_id)
    if obj is None:
        raise CloudError(ErrorCode.NOT_FOUND, f"no such object {object_id}")
    up, down = [], []
    for node_id in sorted(obj.replicas, key=node_order):
        (up if state.nodes[node_id].status == NODE_UP else down).append(node_id)
    return {"replicas_up": up, "replicas_down": down}


def apply_delete(state: ClusterState, args: dict, assigned: dict) -> None:
    object_id = args["object_id"]
    obj = state.objects.pop(object_id)
    for node_id in obj.replicas:
        state.nodes[node_id].used_bytes -= obj.size_bytes
    for node_id in assigned["replicas_down"]:
        state.nodes[node_id].pending_unlink.append(object_id)


def effects_delete(blobs, args: dict, assigned: dict) -> None:
    for node_id in assigned["replicas_up"]:
        blobs.unlink(node_id, args["object_id"])


# --- rereplicate ------------------------------------------------------------------


def plan_rereplicate(state: ClusterState, replication: int, policy: PlacementPolicy) -> dict:
    """Repair objects below the replication target and trim ones above it.

    Objects are visited in id order. Capacity consumed (or freed) by earlier
    repairs in the same pass is tracked so the plan never overcommits a node.
    Objects with zero live replicas, or that cannot reach the target for lack
    of capacity, are reported DEGRADED.
    """
    added: dict[str, list[str]] = {}
    removed: dict[str, list[str]] = {}
    sources: dict[str, str] = {}
    degraded: list[str] = []
    free_delta: dict[str, int] = {}
    for object_id in sorted(state.objects, key=object_order):
        obj = state.objects[object_id]
        live = state.live_replicas(object_id)
        if not live:
            degraded.append(object_id)
            continue
        if len(live) > replication:
            ranked = policy.rank(object_id, live)
            drop = ranked[replication:]
            removed[object_id] = sorted(drop, key=node_order)
            for node_id in drop:
                free_delta[node_id] = free_delta.get(node_id, 0) + obj.size_bytes
            continue
        need = replication - len(live)
        if need == 0:
            continue
        candidates = [
            c
            for c in state.candidates(extra_free=free_delta)
            if c.up and c.node_id not in obj.replicas
        ]
        qualifying = [c.node_id for c in candidates if c.free_bytes >= obj.size_bytes]
        chosen = policy.rank(object_id, qualifying)[:need]
        if chosen:
            added[object_id] = chosen
            sources[object_id] = live[0]
            for node_id in chosen:
                free_delta[node_id] = free_delta.get(node_id, 0) - obj.size_bytes
        if len(chosen) < need:
            degraded.append(object_id)
    repaired = sum(len(v) for v in added.values())
    return {
        "added": added,
        "degraded": degraded,
        "removed": removed,
        "repaired": repaired,
        "sources": sources,
    }


def apply_rereplicate(state: ClusterState, args: dict, assigned: dict) -> None:
    for object_id, node_ids in assigned["added"].items():
        obj = state.objects[object_id]
        for node_id in node_ids:
            obj.replicas.add(node_id)
            state.nodes[node_id].used_bytes += obj.size_bytes
    for object_id, node_ids in assigned["removed"].items():
        obj = state.objects[object_id]
        for node_id in node_ids:
            obj.replicas.discard(node_id)
            state.nodes[node_id].used_bytes -= obj.size_bytes


def effects_rereplicate(blobs, assigned: dict) -> None:
    for object_id, node_ids in assigned["added"].items():
        src = assigned["sources"][object_id]
        for node_id in node_ids:
            try:
                blobs.copy(src, node_id, object_id)
            except FileNotFoundError:
                # Descriptor-level object: accounting exists, bytes never did.
                continue
    for object_id, node_ids in assigned["removed"].items():
        for node_id in node_ids:
            blobs.unlink(node_id, object_id)


# --- clock / metering ----------------------------------------------------------


def plan_advance_clock(state: ClusterState, ticks: int) -> dict:
    if not isinstance(ticks, int) or isinstance(ticks, bool) or ticks < 0:
        raise validation_error("ticks must be an integer >= 0")
    return {}


def apply_advance_clock(state: ClusterState, args: dict, assigned: dict) -> None:
    # The interval [t, t+1) is metered under label t for every Up node.
    for _ in range(args["ticks"]):
        for node_id in state.up_nodes():
            state.ledger.append((state.tick, node_id, state.nodes[node_id].used_bytes))
        state.tick += 1


def usage_report(state: ClusterState, from_tick: int, to_tick: int) -> dict:
    """Per-node and total MiB-ticks over [from_tick, to_tick).

    MiB-ticks round up per ledger entry so billing stays in integers.
    """
    if from_tick > to_tick:
        raise validation_error("from_tick must be <= to_tick")
    node_ids = sorted(state.nodes, key=node_order)
    index = {nid: i for i, nid in enumerate(node_ids)}
    n = len(state.ledger)
    ticks = np.fromiter((e[0] for e in state.ledger), dtype=np.int64, count=n)
    idx = np.fromiter((index[e[1]] for e in state.ledger), dtype=np.int64, count=n)
    sizes = np.fromiter((e[2] for e in state.ledger), dtype=np.int64, count=n)
    per_node = kernels.usage_rollup(ticks, idx, sizes, from_tick, to_tick, len(node_ids))
    totals = {nid: int(per_node[i]) for nid, i in index.items()}
    return {
        "from_tick": from_tick,
        "per_node_mib_ticks": totals,
        "to_tick": to_tick,
        "total_mib_ticks": int(per_node.sum()),
    }


def health(state: ClusterState, replication: int) -> dict:
    degraded = sum(
        1 for oid in state.objects if len(state.live_replicas(oid)) < replication
    )
    up = len(state.up_nodes())
    return {"degraded_objects": degraded, "ok": degraded == 0, "up_nodes": up}


def check_conservation(state: ClusterState) -> None:
    """Assert used_bytes bookkeeping matches replica residency exactly."""
    expected = {nid: 0 for nid in state.nodes}
    for obj in state.objects.values():
        for node_id in obj.replicas:
            expected[node_id] += obj.size_bytes
    for node_id, node in state.nodes.items():
        if node.used_bytes != expected[node_id]:
            raise AssertionError(
                f"{node_id}: used_bytes={node.used_bytes} but replicas total {expected[node_id]}"
            )
        if node.used_bytes > node.capacity_bytes:
            raise AssertionError(f"{node_id}: used_bytes over capacity")


# --- standalone facade -----------------------------------------------------------


class Cluster:
    """Direct, unlogged access to one simulated data center.

    The gateway-facing system drives the same planners/appliers through its
    event log; this facade exists for tests, benchmarks and embedding.
    """

    def __init__(
        self,
        replication: int = 2,
        autoscale: AutoscaleConfig | None = None,
        policy: PlacementPolicy | None = None,
        blobs=None,
    ):
        if not 1 <= replication <= 5:
            raise validation_error("replication factor must be in 1..5")
        self.replication = replication
        self.autoscale = autoscale or AutoscaleConfig()
        self.policy = policy or RendezvousPolicy()
        self.blobs = blobs if blobs is not None else MemoryBlobStore()
        self.state = ClusterState()

    def add_node(self, capacity_bytes: int) -> str:
        assigned = plan_add_node(self.state, capacity_bytes)
        apply_add_node(self.state, {"capacity_bytes": capacity_bytes}, assigned)
        return assigned["node_id"]

    def set_node_status(self, node_id: str, status: str) -> None:
        args = {"node_id": node_id, "status": status}
        assigned = plan_set_node_status(self.state, node_id, status)
        apply_set_node_status(self.state, args, assigned)
        effects_set_node_status(self.blobs, args, assigned)

    def put_descriptor(self, size_bytes: int, checksum: str, r: int | None = None) -> str:
        """Accounting-level put: places and registers an object without bytes."""
        assigned = plan_put(
            self.state, self.autoscale, size_bytes, checksum, r or self.replication, self.policy
        )
        apply_put(self.state, {}, assigned)
        return assigned["object_id"]

    def put_object(self, payload: bytes, r: int | None = None) -> str:
        if not payload:
            raise validation_error("payload must be non-empty")
        assigned = plan_put(
            self.state, self.autoscale, len(payload), sha256_hex(payload),
            r or self.replication, self.policy,
        )
        apply_put(self.state, {}, assigned)
        effects_put(self.blobs, payload, assigned)
        return assigned["object_id"]

    def get_object(self, object_id: str) -> bytes:
        return read_object(self.state, self.blobs, object_id)

    def delete_object(self, object_id: str) -> None:
        args = {"object_id": object_id}
        assigned = plan_delete(self.state, object_id)
        apply_delete(self.state, args, assigned)
        effects_delete(self.blobs, args, assigned)

    def rereplicate(self) -> dict:
        assigned = plan_rereplicate(self.state, self.replication, self.policy)
        apply_rereplicate(self.state, {}, assigned)
        effects_rereplicate(self.blobs, assigned)
        return assigned

    def advance_clock(self, ticks: int) -> None:
        plan_advance_clock(self.state, ticks)
        apply_advance_clock(self.state, {"ticks": ticks}, {})

    def usage_report(self, from_tick: int, to_tick: int) -> dict:
        return usage_report(self.state, from_tick, to_tick)

    def health(self) -> dict:
        return health(self.state, self.replication)


def read_object(state: ClusterState, blobs, object_id: str) -> bytes:
    """Serve bytes from the lowest-numbered Up replica whose checksum holds."""
    obj = state.objects.get(object_id)
    if obj is None:
        raise CloudError(ErrorCode.NOT_FOUND, f"no such object {object_id}")
    live = state.live_replicas(object_id)
    if not live:
        raise CloudError(ErrorCode.DEGRADED, f"all replicas of {object_id} are down")
    for node_id in live:
        try:
            payload = blobs.read(node_id, object_id)
        except FileNotFoundError:
            continue
        if sha256_hex(payload) == obj.checksum:
            return payload
    raise CloudError(
        ErrorCode.DEGRADED, f"no live replica of {object_id} passed verification"
    )
