"""Educational user level: student records, assignment submission, course
materials, and grading.

Record documents are canonical JSON stored as replicated objects in the
data center ("virtualized access"): the index here keeps only object refs
and versions, so every read round-trips through the storage layer and
fault-tolerance tests exercise real data. An update stores a new object,
deletes the old one and repoints the index as one logged mutation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import datacenter
from .core import (
    Capability,
    CloudError,
    ErrorCode,
    StaffRecord,
    StudentRecord,
    canonical_bytes,
    forbidden,
    not_found,
    sha256_hex,
    validation_error,
)
from .datacenter import ClusterState, object_order
from .provider import ProviderState, authorize, resolve_session

NO_USER_FOUND = "No user found"

COURSE_MAX_LEN = 64


def validate_course(course: str) -> str:
    if not isinstance(course, str) or not 1 <= len(course) <= COURSE_MAX_LEN:
        raise validation_error(f"course must be 1-{COURSE_MAX_LEN} characters")
    if not all(c.isalnum() or c in "_-" for c in course):
        raise validation_error("course may contain only letters, digits, '_' and '-'")
    return course


@dataclass
class EduState:
    students: dict[str, dict] = field(default_factory=dict)  # uid -> {object_ref, version}
    staff: dict[str, dict] = field(default_factory=dict)  # uid -> {department, name, version}
    assignments: dict[str, dict] = field(default_factory=dict)
    materials: dict[str, dict] = field(default_factory=dict)
    submission_index: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    next_assignment_seq: int = 1
    next_material_seq: int = 1

    def to_canonical(self) -> dict:
        return {
            "assignments": {aid: dict(a) for aid, a in self.assignments.items()},
            "materials": {mid: dict(m) for mid, m in self.materials.items()},
            "next_ids": {
                "assignment": self.next_assignment_seq,
                "material": self.next_material_seq,
            },
            "staff": {uid: dict(s) for uid, s in self.staff.items()},
            "students": {uid: dict(s) for uid, s in self.students.items()},
            "submission_index": {
                course: {owner: list(aids) for owner, aids in owners.items()}
                for course, owners in self.submission_index.items()
            },
        }

    def record_id_taken(self, user_id: str) -> bool:
        # Students and staff share one id namespace.
        return user_id in self.students or user_id in self.staff


@dataclass(frozen=True)
class EduContext:
    """Everything edu planners need from the rest of the system."""

    provider: ProviderState
    edu: EduState
    cluster: ClusterState
    capabilities_of: object
    policy: object
    autoscale: datacenter.AutoscaleConfig
    replication: int
    max_upload_bytes: int
    session_expiry_ticks: int | None

    def auth(self, token: str | None, capability: Capability):
        return authorize(
            self.provider,
            self.capabilities_of,
            token,
            capability,
            self.cluster.tick,
            self.session_expiry_ticks,
        )

    def session(self, token: str | None):
        return resolve_session(
            self.provider, token, self.cluster.tick, self.session_expiry_ticks
        )

    def has_capability(self, session, capability: Capability) -> bool:
        return capability.value in self.capabilities_of(session.active_role)


# --- student records ------------------------------------------------------------


def record_doc_from_input(fields: dict) -> StudentRecord:
    if not isinstance(fields, dict):
        raise validation_error("record must be an object")
    required = {"user_id", "name", "program", "year", "contact"}
    missing = required - set(fields)
    if missing:
        raise validation_error(f"missing record fields: {sorted(missing)}")
    extra = set(fields) - required
    if extra:
        raise validation_error(f"unknown record fields: {sorted(extra)}")
    return StudentRecord(
        user_id=fields["user_id"],
        name=fields["name"],
        program=fields["program"],
        year=fields["year"],
        contact=fields["contact"],
        version=1,
    ).validate()


def plan_insert_student(ctx: EduContext, token: str | None, fields: dict) -> tuple[dict, dict]:
    ctx.auth(token, Capability.STUDENT_INSERT)
    record = record_doc_from_input(fields)
    if ctx.edu.record_id_taken(record.user_id):
        raise CloudError(ErrorCode.DUPLICATE_ID, f"record {record.user_id} already exists")
    doc = record.to_doc()
    payload = canonical_bytes(doc)
    put = datacenter.plan_put(
        ctx.cluster, ctx.autoscale, len(payload), sha256_hex(payload),
        ctx.replication, ctx.policy,
    )
    args = {"record": doc, "token": token}
    return args, {"put": put}


def apply_insert_student(edu: EduState, cluster: ClusterState, args: dict, assigned: dict) -> None:
    datacenter.apply_put(cluster, {}, assigned["put"])
    edu.students[args["record"]["user_id"]] = {
        "object_ref": assigned["put"]["object_id"],
        "version": 1,
    }


def effects_insert_student(blobs, args: dict, assigned: dict) -> None:
    datacenter.effects_put(blobs, canonical_bytes(args["record"]), assigned["put"])


def _check_record_access(ctx: EduContext, token: str | None, user_id: str, any_cap, self_cap):
    """FORBIDDEN before NOT_FOUND: access rules leak no record existence."""
    session = ctx.session(token)
    if ctx.has_capability(session, any_cap):
        return session, "any"
    if ctx.has_capability(session, self_cap):
        if user_id != session.user_id:
            raise forbidden("self access only")
        return session, "self"
    raise forbidden(
        f"role {session.active_role} lacks {any_cap.value} and {self_cap.value}"
    )


def retrieve_student(ctx: EduContext, blobs, token: str | None, user_id: str) -> dict:
    _check_record_access(
        ctx, token, user_id, Capability.STUDENT_RETRIEVE_ANY, Capability.STUDENT_READ_SELF
    )
    entry = ctx.edu.students.get(user_id)
    if entry is None:
        raise not_found(NO_USER_FOUND)
    payload = datacenter.read_object(ctx.cluster, blobs, entry["object_ref"])
    record = StudentRecord.from_doc(_parse_record(payload))
    if record.version != entry["version"]:
        raise CloudError(
            ErrorCode.REPLAY_ERROR,
            f"index version {entry['version']} != stored version {record.version}",
        )
    return record.to_doc()


def _parse_record(payload: bytes) -> dict:
    return json.loads(payload.decode("utf-8"))


def plan_update_student(
    ctx: EduContext, blobs, token: str | None, user_id: str, patch: dict
) -> tuple[dict, dict]:
    session, scope = _check_record_access(
        ctx, token, user_id, Capability.STUDENT_UPDATE_ANY, Capability.STUDENT_UPDATE_SELF
    )
    if not isinstance(patch, dict) or not patch:
        raise validation_error("patch must be a non-empty object")
    allowed = (
        StudentRecord.MUTABLE_FIELDS if scope == "any" else StudentRecord.SELF_MUTABLE_FIELDS
    )
    bad = set(patch) - set(allowed)
    if bad:
        raise validation_error(f"fields not updatable here: {sorted(bad)}")
    entry = ctx.edu.students.get(user_id)
    if entry is None:
        raise not_found(NO_USER_FOUND)
    current = StudentRecord.from_doc(
        _parse_record(datacenter.read_object(ctx.cluster, blobs, entry["object_ref"]))
    )
    new_doc = current.to_doc()
    new_doc.update(patch)
    new_doc["version"] = current.version + 1
    record = StudentRecord.from_doc(new_doc)
    payload = canonical_bytes(record.to_doc())
    put = datacenter.plan_put(
        ctx.cluster, ctx.autoscale, len(payload), sha256_hex(payload),
        ctx.replication, ctx.policy,
    )
    delete = datacenter.plan_delete(ctx.cluster, entry["object_ref"])
    args = {"patch": dict(patch), "token": token, "user_id": user_id}
    assigned = {
        "delete": delete,
        "new_doc": record.to_doc(),
        "old_object_id": entry["object_ref"],
        "put": put,
        "version": record.version,
    }
    return args, assigned


def apply_update_student(edu: EduState, cluster: ClusterState, args: dict, assigned: dict) -> None:
    datacenter.apply_put(cluster, {}, assigned["put"])
    datacenter.apply_delete(cluster, {"object_id": assigned["old_object_id"]}, assigned["delete"])
    edu.students[args["user_id"]] = {
        "object_ref": assigned["put"]["object_id"],
        "version": assigned["version"],
    }


def effects_update_student(blobs, args: dict, assigned: dict) -> None:
    datacenter.effects_put(blobs, canonical_bytes(assigned["new_doc"]), assigned["put"])
    datacenter.effects_delete(
        blobs, {"object_id": assigned["old_object_id"]}, assigned["delete"]
    )


# --- assignments -------------------------------------------------------------------


def plan_submit_assignment(
    ctx: EduContext, token: str | None, course: str, payload: bytes
) -> tuple[dict, dict]:
    session = ctx.auth(token, Capability.ASSIGNMENT_SUBMIT)
    validate_course(course)
    if not payload:
        raise validation_error("assignment payload must be non-empty")
    if len(payload) > ctx.max_upload_bytes:
        raise validation_error(
            f"payload of {len(payload)} bytes exceeds limit {ctx.max_upload_bytes}"
        )
    put = datacenter.plan_put(
        ctx.cluster, ctx.autoscale, len(payload), sha256_hex(payload),
        ctx.replication, ctx.policy,
    )
    args = {
        "checksum": put["checksum"],
        "course": course,
        "size_bytes": len(payload),
        "token": token,
    }
    assigned = {
        "assignment_id": f"asg-{ctx.edu.next_assignment_seq}",
        "owner": session.user_id,
        "put": put,
    }
    return args, assigned


def apply_submit_assignment(
    edu: EduState, cluster: ClusterState, args: dict, assigned: dict
) -> None:
    datacenter.apply_put(cluster, {}, assigned["put"])
    aid = assigned["assignment_id"]
    if aid != f"asg-{edu.next_assignment_seq}":
        raise CloudError(ErrorCode.REPLAY_ERROR, f"assignment id {aid} out of sequence")
    edu.assignments[aid] = {
        "course": args["course"],
        "grade": None,
        "object_ref": assigned["put"]["object_id"],
        "owner": assigned["owner"],
        "submitted_at_tick": cluster.tick,
    }
    owners = edu.submission_index.setdefault(args["course"], {})
    owners.setdefault(assigned["owner"], []).append(aid)
    edu.next_assignment_seq += 1


def list_submissions(ctx: EduContext, token: str | None, course: str) -> list[dict]:
    ctx.auth(token, Capability.SUBMISSION_LIST)
    validate_course(course)
    owners = ctx.edu.submission_index.get(course, {})
    aids = [aid for lst in owners.values() for aid in lst]
    aids.sort(key=lambda a: (ctx.edu.assignments[a]["submitted_at_tick"], object_order(a)))
    out = []
    for aid in aids:
        meta = ctx.edu.assignments[aid]
        obj = ctx.cluster.objects[meta["object_ref"]]
        out.append(
            {
                "course": meta["course"],
                "grade": meta["grade"],
                "id": aid,
                "object_ref": meta["object_ref"],
                "owner": meta["owner"],
                "size_bytes": obj.size_bytes,
                "submitted_at_tick": meta["submitted_at_tick"],
            }
        )
    return out


def plan_record_grade(
    ctx: EduContext, token: str | None, assignment_id: str, grade: str
) -> tuple[dict, dict]:
    ctx.auth(token, Capability.GRADE_RECORD)
    if not isinstance(grade, str) or not 1 <= len(grade) <= 16:
        raise validation_error("grade must be 1-16 characters")
    if assignment_id not in ctx.edu.assignments:
        raise not_found(f"no such assignment {assignment_id}")
    return {"assignment_id": assignment_id, "grade": grade, "token": token}, {}


def apply_record_grade(edu: EduState, args: dict, assigned: dict) -> None:
    edu.assignments[args["assignment_id"]]["grade"] = args["grade"]


# --- course materials ----------------------------------------------------------------


def plan_upload_material(
    ctx: EduContext, token: str | None, course: str, payload: bytes
) -> tuple[dict, dict]:
    session = ctx.auth(token, Capability.MATERIAL_UPLOAD)
    validate_course(course)
    if not payload:
        raise validation_error("material payload must be non-empty")
    if len(payload) > ctx.max_upload_bytes:
        raise validation_error(
            f"payload of {len(payload)} bytes exceeds limit {ctx.max_upload_bytes}"
        )
    put = datacenter.plan_put(
        ctx.cluster, ctx.autoscale, len(payload), sha256_hex(payload),
        ctx.replication, ctx.policy,
    )
    args = {
        "checksum": put["checksum"],
        "course": course,
        "size_bytes": len(payload),
        "token": token,
    }
    assigned = {
        "material_id": f"mat-{ctx.edu.next_material_seq}",
        "put": put,
        "uploader": session.user_id,
    }
    return args, assigned


def apply_upload_material(
    edu: EduState, cluster: ClusterState, args: dict, assigned: dict
) -> None:
    datacenter.apply_put(cluster, {}, assigned["put"])
    mid = assigned["material_id"]
    if mid != f"mat-{edu.next_material_seq}":
        raise CloudError(ErrorCode.REPLAY_ERROR, f"material id {mid} out of sequence")
    edu.materials[mid] = {
        "course": args["course"],
        "object_ref": assigned["put"]["object_id"],
        "uploader": assigned["uploader"],
    }
    edu.next_material_seq += 1


def download_material(
    ctx: EduContext, blobs, token: str | None, course: str, material_id: str
) -> bytes:
    ctx.auth(token, Capability.MATERIAL_DOWNLOAD)
    meta = ctx.edu.materials.get(material_id)
    if meta is None or meta["course"] != course:
        raise not_found(f"no such material {material_id} in {course}")
    return datacenter.read_object(ctx.cluster, blobs, meta["object_ref"])


# --- staff records ---------------------------------------------------------------------


def plan_register_staff(ctx: EduContext, token: str | None, fields: dict) -> tuple[dict, dict]:
    ctx.auth(token, Capability.ADMIN_ACCOUNTS)
    record = StaffRecord(
        user_id=fields.get("user_id", ""),
        name=fields.get("name", ""),
        department=fields.get("department", ""),
    ).validate()
    if ctx.edu.record_id_taken(record.user_id):
        raise CloudError(ErrorCode.DUPLICATE_ID, f"record {record.user_id} already exists")
    args = {
        "record": {
            "department": record.department,
            "name": record.name,
            "user_id": record.user_id,
        },
        "token": token,
    }
    return args, {}


def apply_register_staff(edu: EduState, args: dict, assigned: dict) -> None:
    rec = args["record"]
    edu.staff[rec["user_id"]] = {
        "department": rec["department"],
        "name": rec["name"],
        "version": 1,
    }


# --- audit -----------------------------------------------------------------------------


def audit_refs(edu: EduState, cluster: ClusterState) -> dict:
    """Index object refs vs live cluster objects: no leaks, no dangling refs."""
    refs = {e["object_ref"] for e in edu.students.values()}
    refs |= {a["object_ref"] for a in edu.assignments.values()}
    refs |= {m["object_ref"] for m in edu.materials.values()}
    live = set(cluster.objects)
    return {
        "dangling": sorted(refs - live),
        "leaked": sorted(live - refs),
        "ok": refs == live,
    }
