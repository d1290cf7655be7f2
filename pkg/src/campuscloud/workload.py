"""Deterministic workload generation against the wire API.

A workload is a seeded stream of operations with a configurable mix
(percentages summing to 100). Runs are reproducible: the same spec against
the same initial state produces the same request sequence, the same error
counts, and the same final state digest. The runner only ever speaks the
gateway protocol, so it works identically over HTTP or in-process.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .core import validation_error

DEFAULT_MIX = {"retrieve": 50, "insert": 20, "submit": 15, "update": 10, "admin": 5}

FIRST_NAMES = ["Aarav", "Diya", "Ishaan", "Meera", "Rohan", "Sana", "Vikram", "Zara"]
PROGRAMS = ["BSc CS", "BA History", "MSc Physics", "BTech EE", "MA Economics"]
COURSES = ["cs101", "cs202", "phy110", "eco201"]


@dataclass
class WorkloadSpec:
    seed: int
    ops: int
    mix: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_MIX))
    students: int = 4
    courses: list[str] = field(default_factory=lambda: list(COURSES))
    admin_user: str = "admin"
    admin_secret: str = "admin"
    staff_user: str = "staff1"
    staff_secret: str = "pw-staff1"

    def __post_init__(self):
        if self.ops <= 0:
            raise validation_error("ops must be > 0")
        if set(self.mix) - set(DEFAULT_MIX):
            raise validation_error(f"unknown mix keys: {sorted(set(self.mix) - set(DEFAULT_MIX))}")
        if sum(self.mix.values()) != 100:
            raise validation_error("mix percentages must sum to 100")

    @classmethod
    def from_dict(cls, raw: dict) -> "WorkloadSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise validation_error(f"unknown workload keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path: str | Path) -> "WorkloadSpec":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


class WorkloadRunner:
    """Drives one workload through an httpx-compatible client."""

    def __init__(self, client, spec: WorkloadSpec):
        self.client = client
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.known_ids: list[str] = []
        self.by_op: dict[str, int] = {}
        self.errors_by_code: dict[str, int] = {}
        self.student_tokens: list[str] = []
        self.staff_token = ""
        self.admin_token = ""
        self.toggle_node: str | None = None
        self.node_down = False
        self._insert_seq = 0

    # -- plumbing ------------------------------------------------------------

    def _call(self, method: str, path: str, token: str | None = None, **kwargs):
        headers = kwargs.pop("headers", {})
        if token:
            headers["Authorization"] = f"Bearer {token}"
        resp = self.client.request(method, path, headers=headers, **kwargs)
        if resp.status_code >= 400:
            code = resp.json().get("code", f"HTTP_{resp.status_code}")
            self.errors_by_code[code] = self.errors_by_code.get(code, 0) + 1
        return resp

    def _login(self, user: str, secret: str, role: str | None = None) -> str:
        body = {"secret": secret, "user_id": user}
        if role:
            body["role"] = role
        resp = self._call("POST", "/api/v1/login", json=body)
        if resp.status_code != 200:
            raise validation_error(f"workload login as {user} failed: {resp.text}")
        return resp.json()["token"]

    def _setup(self) -> None:
        self.admin_token = self._login(self.spec.admin_user, self.spec.admin_secret)
        # Staff and student pool accounts; DUPLICATE_ID means an earlier run
        # (or seeding) already created them, which is fine.
        self._call(
            "POST", "/api/v1/admin/accounts", token=self.admin_token,
            json={"roles": ["Staff"], "secret": self.spec.staff_secret,
                  "user_id": self.spec.staff_user},
        )
        self.staff_token = self._login(self.spec.staff_user, self.spec.staff_secret)
        for i in range(self.spec.students):
            uid = f"wl{self.spec.seed}-{i}"
            secret = f"pw-{uid}"
            self._call(
                "POST", "/api/v1/admin/accounts", token=self.admin_token,
                json={"roles": ["Student"], "secret": secret, "user_id": uid},
            )
            self.student_tokens.append(self._login(uid, secret))
        # One sacrificial node this workload may fail and recover.
        resp = self._call(
            "POST", "/api/v1/admin/nodes", token=self.admin_token,
            json={"capacity_bytes": 1 << 30},
        )
        if resp.status_code == 200:
            self.toggle_node = resp.json()["node_id"]

    # -- operations ------------------------------------------------------------

    def _fresh_id(self) -> str:
        self._insert_seq += 1
        return f"w{self.spec.seed}-{self._insert_seq}"

    def _op_insert(self) -> None:
        if self.known_ids and self.rng.random() < 0.15:
            uid = self.rng.choice(self.known_ids)  # deliberate duplicate
        else:
            uid = self._fresh_id()
        record = {
            "contact": f"{uid}@university.example",
            "name": self.rng.choice(FIRST_NAMES),
            "program": self.rng.choice(PROGRAMS),
            "user_id": uid,
            "year": self.rng.randint(1, 5),
        }
        resp = self._call("POST", "/api/v1/students", token=self.staff_token, json=record)
        if resp.status_code == 200 and uid not in self.known_ids:
            self.known_ids.append(uid)

    def _op_retrieve(self) -> None:
        if self.known_ids and self.rng.random() < 0.85:
            uid = self.rng.choice(self.known_ids)
        else:
            uid = f"zz-{self.rng.randint(1000, 9999)}"
        self._call("GET", f"/api/v1/students/{uid}", token=self.staff_token)

    def _op_update(self) -> None:
        if self.known_ids and self.rng.random() < 0.9:
            uid = self.rng.choice(self.known_ids)
        else:
            uid = f"zz-{self.rng.randint(1000, 9999)}"
        patch = {"contact": f"{uid}+{self.rng.randint(0, 999)}@university.example"}
        self._call("PATCH", f"/api/v1/students/{uid}", token=self.staff_token, json=patch)

    def _op_submit(self) -> None:
        token = self.rng.choice(self.student_tokens)
        course = self.rng.choice(self.spec.courses)
        payload = self.rng.randbytes(self.rng.randint(64, 2048))
        self._call(
            "POST", f"/api/v1/courses/{course}/assignments", token=token,
            content=payload, headers={"Content-Type": "application/octet-stream"},
        )

    def _op_admin(self) -> None:
        kind = self.rng.choice(["advance", "toggle", "rereplicate"])
        if kind == "advance":
            self._call(
                "POST", "/api/v1/admin/clock/advance", token=self.admin_token,
                json={"ticks": self.rng.randint(1, 3)},
            )
        elif kind == "toggle" and self.toggle_node:
            status = "Up" if self.node_down else "Down"
            self._call(
                "POST", f"/api/v1/admin/nodes/{self.toggle_node}/status",
                token=self.admin_token, json={"status": status},
            )
            self.node_down = not self.node_down
        else:
            self._call("POST", "/api/v1/admin/rereplicate", token=self.admin_token)

    # -- driver -------------------------------------------------------------------

    def run(self) -> dict:
        self._setup()
        ops = {
            "admin": self._op_admin,
            "insert": self._op_insert,
            "retrieve": self._op_retrieve,
            "submit": self._op_submit,
            "update": self._op_update,
        }
        names = sorted(self.spec.mix)
        weights = [self.spec.mix[n] for n in names]
        for _ in range(self.spec.ops):
            name = self.rng.choices(names, weights=weights, k=1)[0]
            ops[name]()
            self.by_op[name] = self.by_op.get(name, 0) + 1
        digest = self.client.get("/api/v1/digest").json()["state_digest"]
        return {
            "by_op": dict(sorted(self.by_op.items())),
            "errors_by_code": dict(sorted(self.errors_by_code.items())),
            "final_state_digest": digest,
            "ops_applied": self.spec.ops,
        }
