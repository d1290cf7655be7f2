"""Shared vocabulary: roles, capabilities, error codes, record types,
identifier validation, and canonical serialization / state hashing.

Everything here is a pure function or an immutable value type; the rest of
the package depends on this module and nothing in it depends back.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any

USER_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]{3,32}$")

NAME_MAX_LEN = 128
FIELD_MAX_LEN = 1024


class Role(str, Enum):
    STUDENT = "Student"
    STAFF = "Staff"
    ADMIN = "Admin"


# Canonical ordering used wherever a deterministic default role is needed.
ROLE_ORDER = (Role.STUDENT, Role.STAFF, Role.ADMIN)


class Capability(str, Enum):
    STUDENT_READ_SELF = "STUDENT_READ_SELF"
    STUDENT_UPDATE_SELF = "STUDENT_UPDATE_SELF"
    ASSIGNMENT_SUBMIT = "ASSIGNMENT_SUBMIT"
    MATERIAL_DOWNLOAD = "MATERIAL_DOWNLOAD"
    STUDENT_INSERT = "STUDENT_INSERT"
    STUDENT_RETRIEVE_ANY = "STUDENT_RETRIEVE_ANY"
    STUDENT_UPDATE_ANY = "STUDENT_UPDATE_ANY"
    MATERIAL_UPLOAD = "MATERIAL_UPLOAD"
    SUBMISSION_LIST = "SUBMISSION_LIST"
    GRADE_RECORD = "GRADE_RECORD"
    SERVICE_REQUEST = "SERVICE_REQUEST"
    ADMIN_NODE_OPS = "ADMIN_NODE_OPS"
    ADMIN_BILLING = "ADMIN_BILLING"
    ADMIN_ACCOUNTS = "ADMIN_ACCOUNTS"
    ADMIN_CLOCK = "ADMIN_CLOCK"


class ErrorCode(str, Enum):
    DUPLICATE_ID = "DUPLICATE_ID"
    NOT_FOUND = "NOT_FOUND"
    FORBIDDEN = "FORBIDDEN"
    UNAUTHORIZED = "UNAUTHORIZED"
    VALIDATION = "VALIDATION"
    CAPACITY_EXCEEDED = "CAPACITY_EXCEEDED"
    INSUFFICIENT_NODES = "INSUFFICIENT_NODES"
    REPLAY_ERROR = "REPLAY_ERROR"
    DEGRADED = "DEGRADED"


class CloudError(Exception):
    """Failure of any operation; carries exactly one ErrorCode."""

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(f"{code.value}: {message}")
        self.code = code
        self.message = message


def validation_error(message: str) -> CloudError:
    return CloudError(ErrorCode.VALIDATION, message)


def not_found(message: str) -> CloudError:
    return CloudError(ErrorCode.NOT_FOUND, message)


def forbidden(message: str) -> CloudError:
    return CloudError(ErrorCode.FORBIDDEN, message)


def unauthorized(message: str) -> CloudError:
    return CloudError(ErrorCode.UNAUTHORIZED, message)


def validate_user_id(raw: str) -> str:
    """Return the id unchanged iff it is 3-32 chars of [A-Za-z0-9_-]."""
    if not isinstance(raw, str):
        raise validation_error("user id must be a string")
    if len(raw) < 3:
        raise validation_error("user id shorter than 3 characters")
    if len(raw) > 32:
        raise validation_error("user id longer than 32 characters")
    if not USER_ID_PATTERN.match(raw):
        raise validation_error("user id may contain only letters, digits, '_' and '-'")
    return raw


def _check_text(value: Any, field_name: str, min_len: int = 0, max_len: int = FIELD_MAX_LEN) -> str:
    if not isinstance(value, str):
        raise validation_error(f"{field_name} must be a string")
    if len(value) < min_len:
        raise validation_error(f"{field_name} must be at least {min_len} character(s)")
    if len(value) > max_len:
        raise validation_error(f"{field_name} longer than {max_len} characters")
    return value


@dataclass(frozen=True)
class StudentRecord:
    user_id: str
    name: str
    program: str
    year: int
    contact: str
    version: int = 1

    # Fields a plain update may touch; user_id and version are managed.
    MUTABLE_FIELDS = ("name", "program", "year", "contact")
    SELF_MUTABLE_FIELDS = ("contact",)

    def validate(self) -> "StudentRecord":
        validate_user_id(self.user_id)
        _check_text(self.name, "name", min_len=1, max_len=NAME_MAX_LEN)
        _check_text(self.program, "program")
        _check_text(self.contact, "contact")
        if not isinstance(self.year, int) or isinstance(self.year, bool) or self.year < 1:
            raise validation_error("year must be an integer >= 1")
        if not isinstance(self.version, int) or self.version < 1:
            raise validation_error("version must be an integer >= 1")
        return self

    def to_doc(self) -> dict:
        return {
            "contact": self.contact,
            "name": self.name,
            "program": self.program,
            "user_id": self.user_id,
            "version": self.version,
            "year": self.year,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "StudentRecord":
        return cls(
            user_id=doc["user_id"],
            name=doc["name"],
            program=doc["program"],
            year=doc["year"],
            contact=doc["contact"],
            version=doc["version"],
        ).validate()


@dataclass(frozen=True)
class StaffRecord:
    user_id: str
    name: str
    department: str
    version: int = 1

    def validate(self) -> "StaffRecord":
        validate_user_id(self.user_id)
        _check_text(self.name, "name", min_len=1, max_len=NAME_MAX_LEN)
        _check_text(self.department, "department")
        if not isinstance(self.version, int) or self.version < 1:
            raise validation_error("version must be an integer >= 1")
        return self


@dataclass(frozen=True)
class Assignment:
    id: str
    course: str
    owner: str
    object_ref: str
    submitted_at_tick: int
    grade: str | None = None


@dataclass(frozen=True)
class CourseMaterial:
    id: str
    course: str
    uploader: str
    object_ref: str


# --- Canonical serialization ------------------------------------------------
#
# Canonical JSON: sorted keys, UTF-8, no insignificant whitespace, base-10
# integers. Floats are rejected outright so digests can never drift across
# platforms; all quantities in this system are integers by design.


def _reject_floats(value: Any) -> None:
    if isinstance(value, float):
        raise validation_error("floats are not canonically serializable")
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise validation_error("canonical object keys must be strings")
            _reject_floats(v)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _reject_floats(v)


def canonical_dumps(value: Any) -> str:
    _reject_floats(value)
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(value: Any) -> bytes:
    return canonical_dumps(value).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def state_digest(state: Any) -> str:
    """SHA-256 over the canonical serialization of a full system state."""
    return sha256_hex(canonical_bytes(state))
