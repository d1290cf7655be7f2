"""Replica payload storage behind the cluster's accounting.

Two implementations:

* ``DiskBlobStore`` - the operator-facing layout: one directory per node,
  one file per replica named after the object id, plus a per-node
  ``manifest.json`` in canonical JSON.
* ``MemoryBlobStore`` - dict-backed, for tests and ephemeral systems.

Replay needs no blob store at all: event appliers are pure state
transitions, and payload bytes (when they exist) already live on disk.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .core import canonical_bytes, sha256_hex


class MemoryBlobStore:
    def __init__(self):
        self._blobs: dict[tuple[str, str], bytes] = {}

    def write(self, node_id: str, object_id: str, payload: bytes) -> None:
        self._blobs[(node_id, object_id)] = bytes(payload)

    def read(self, node_id: str, object_id: str) -> bytes:
        try:
            return self._blobs[(node_id, object_id)]
        except KeyError:
            raise FileNotFoundError(f"{node_id}/{object_id}")

    def copy(self, src_node: str, dst_node: str, object_id: str) -> None:
        self.write(dst_node, object_id, self.read(src_node, object_id))

    def unlink(self, node_id: str, object_id: str) -> None:
        self._blobs.pop((node_id, object_id), None)

    def exists(self, node_id: str, object_id: str) -> bool:
        return (node_id, object_id) in self._blobs


class DiskBlobStore:
    """One directory per node under ``root``; manifests track size+checksum."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        # manifest cache: node_id -> {object_id: {"size_bytes", "checksum"}}
        self._manifests: dict[str, dict] = {}

    def _node_dir(self, node_id: str) -> Path:
        d = self.root / node_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _manifest(self, node_id: str) -> dict:
        if node_id not in self._manifests:
            path = self._node_dir(node_id) / "manifest.json"
            if path.exists():
                self._manifests[node_id] = json.loads(path.read_text("utf-8"))
            else:
                self._manifests[node_id] = {}
        return self._manifests[node_id]

    def _write_manifest(self, node_id: str) -> None:
        path = self._node_dir(node_id) / "manifest.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(canonical_bytes(self._manifest(node_id)))
        os.replace(tmp, path)

    def write(self, node_id: str, object_id: str, payload: bytes) -> None:
        path = self._node_dir(node_id) / object_id
        path.write_bytes(payload)
        self._manifest(node_id)[object_id] = {
            "checksum": sha256_hex(payload),
            "size_bytes": len(payload),
        }
        self._write_manifest(node_id)

    def read(self, node_id: str, object_id: str) -> bytes:
        return (self._node_dir(node_id) / object_id).read_bytes()

    def copy(self, src_node: str, dst_node: str, object_id: str) -> None:
        self.write(dst_node, object_id, self.read(src_node, object_id))

    def unlink(self, node_id: str, object_id: str) -> None:
        path = self._node_dir(node_id) / object_id
        if path.exists():
            path.unlink()
        if self._manifest(node_id).pop(object_id, None) is not None:
            self._write_manifest(node_id)

    def exists(self, node_id: str, object_id: str) -> bool:
        return (self._node_dir(node_id) / object_id).exists()
