"""Replica placement: rendezvous (highest-random-weight) hashing by default.

Placement is a pure function of the object id, the candidate node set and the
replica count, so plans are reproducible and node arrivals move a minimal
share of objects. The policy is a seam: anything implementing
``PlacementPolicy`` can be swapped in when constructing a cluster.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .core import CloudError, ErrorCode
from .kernels import rendezvous_scores


@dataclass(frozen=True)
class CandidateNode:
    """What a policy is allowed to see about a node."""

    node_id: str
    free_bytes: int
    up: bool


@dataclass(frozen=True)
class PlacementPlan:
    object_id: str
    replicas: tuple[str, ...]


class PlacementPolicy(Protocol):
    def rank(self, object_id: str, candidates: Sequence[str]) -> list[str]:
        """Order qualifying node ids, best first."""
        ...


class RendezvousPolicy:
    """Rank nodes by FNV-1a-64 of ``<node_id>:<object_id>``, highest first.

    Ties (a 1-in-2^64 event) break toward the lexicographically smaller
    node id.
    """

    def rank(self, object_id: str, candidates: Sequence[str]) -> list[str]:
        ids = list(candidates)
        scores = rendezvous_scores(ids, object_id)
        return [nid for nid, _ in sorted(zip(ids, scores), key=lambda kv: (-int(kv[1]), kv[0]))]


def place(
    object_id: str,
    size_bytes: int,
    r: int,
    candidates: Sequence[CandidateNode],
    policy: PlacementPolicy,
    exclude: frozenset[str] = frozenset(),
) -> PlacementPlan:
    """Choose r distinct Up nodes with room for the object.

    Raises INSUFFICIENT_NODES when fewer than r nodes qualify; the message
    distinguishes a shortage of Up nodes from a shortage of capacity so the
    caller can map the failure to the right error.
    """
    if r < 1:
        raise CloudError(ErrorCode.VALIDATION, "replica count must be >= 1")
    up = [c for c in candidates if c.up and c.node_id not in exclude]
    qualifying = [c.node_id for c in up if c.free_bytes >= size_bytes]
    if len(qualifying) < r:
        if len(up) < r:
            raise CloudError(
                ErrorCode.INSUFFICIENT_NODES,
                f"need {r} up nodes, have {len(up)}",
            )
        raise CloudError(
            ErrorCode.INSUFFICIENT_NODES,
            f"capacity: only {len(qualifying)} of {len(up)} up nodes "
            f"can hold {size_bytes} bytes",
        )
    ranked = policy.rank(object_id, qualifying)
    return PlacementPlan(object_id=object_id, replicas=tuple(ranked[:r]))


def capacity_shortage(err: CloudError) -> bool:
    """True when an INSUFFICIENT_NODES failure was caused by capacity."""
    return err.code is ErrorCode.INSUFFICIENT_NODES and err.message.startswith("capacity:")
