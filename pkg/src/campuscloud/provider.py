"""Provider level: accounts, sessions, role switching, capability checks,
the service catalog, and billing over the usage ledger.

Secrets are stored as salted SHA-256 only. Unknown user and wrong secret
produce the identical UNAUTHORIZED error so accounts cannot be enumerated.
Session tokens and salts are derived from the system seed plus a counter
held in replayed state, which makes them unguessable to clients (the seed
never leaves the server) yet exactly reproducible by log replay.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .core import (
    Capability,
    CloudError,
    ErrorCode,
    ROLE_ORDER,
    Role,
    forbidden,
    unauthorized,
    validate_user_id,
    validation_error,
)

TOKEN_HEX_LEN = 32  # 128 bits
SALT_HEX_LEN = 32  # 16 bytes

BAD_CREDENTIALS = "unknown user or wrong secret"


def derive_hex(seed: str, purpose: str, counter: int, hex_len: int) -> str:
    digest = hashlib.sha256(f"{seed}:{purpose}:{counter}".encode("utf-8")).hexdigest()
    return digest[:hex_len]


def hash_secret(salt_hex: str, secret: str) -> str:
    return hashlib.sha256(bytes.fromhex(salt_hex) + secret.encode("utf-8")).hexdigest()


@dataclass
class AccountState:
    roles: set[str]
    salt: str
    secret_hash: str
    requested_services: set[str] = field(default_factory=set)

    def to_canonical(self) -> dict:
        return {
            "requested_services": sorted(self.requested_services),
            "roles": sorted(self.roles),
            "salt": self.salt,
            "secret_hash": self.secret_hash,
        }


@dataclass
class SessionState:
    user_id: str
    active_role: str
    created_at_tick: int
    expired: bool = False

    def to_canonical(self) -> dict:
        return {
            "active_role": self.active_role,
            "created_at_tick": self.created_at_tick,
            "expired": self.expired,
            "user_id": self.user_id,
        }


@dataclass
class ProviderState:
    accounts: dict[str, AccountState] = field(default_factory=dict)
    sessions: dict[str, SessionState] = field(default_factory=dict)
    next_token_seq: int = 1
    next_salt_seq: int = 1

    def to_canonical(self) -> dict:
        return {
            "accounts": {uid: a.to_canonical() for uid, a in self.accounts.items()},
            "next_ids": {"salt": self.next_salt_seq, "token": self.next_token_seq},
            "sessions": {tok: s.to_canonical() for tok, s in self.sessions.items()},
        }


def session_live(session: SessionState, tick: int, expiry_ticks: int | None) -> bool:
    if session.expired:
        return False
    if expiry_ticks is not None and tick - session.created_at_tick >= expiry_ticks:
        return False
    return True


def resolve_session(
    state: ProviderState, token: str | None, tick: int, expiry_ticks: int | None
) -> SessionState:
    if not token:
        raise unauthorized("missing bearer token")
    session = state.sessions.get(token)
    if session is None or not session_live(session, tick, expiry_ticks):
        raise unauthorized("invalid or expired session token")
    return session


def authorize(
    state: ProviderState,
    capabilities_of,
    token: str | None,
    capability: Capability,
    tick: int,
    expiry_ticks: int | None,
) -> SessionState:
    """Session must be live and its active role must hold the capability."""
    session = resolve_session(state, token, tick, expiry_ticks)
    if capability.value not in capabilities_of(session.active_role):
        raise forbidden(
            f"role {session.active_role} lacks capability {capability.value}"
        )
    return session


def authorize_query(
    state: ProviderState,
    capabilities_of,
    token: str | None,
    capability: Capability,
    tick: int,
    expiry_ticks: int | None,
) -> dict:
    """Pure allow/deny form; never raises."""
    try:
        authorize(state, capabilities_of, token, capability, tick, expiry_ticks)
    except CloudError as err:
        return {"allowed": False, "reason": err.code.value}
    return {"allowed": True, "reason": None}


# --- create_account ---------------------------------------------------------


def plan_create_account(
    state: ProviderState, seed: str, user_id: str, roles: list[str], secret: str
) -> tuple[dict, dict]:
    validate_user_id(user_id)
    if not isinstance(roles, list) or not roles:
        raise validation_error("account must hold at least one role (a list)")
    for role in roles:
        if role not in (r.value for r in Role):
            raise validation_error(f"unknown role {role!r}")
    if len(set(roles)) != len(roles):
        raise validation_error("duplicate roles")
    if not isinstance(secret, str) or not secret:
        raise validation_error("secret must be a non-empty string")
    if user_id in state.accounts:
        raise CloudError(ErrorCode.DUPLICATE_ID, f"account {user_id} already exists")
    salt = derive_hex(seed, "salt", state.next_salt_seq, SALT_HEX_LEN)
    args = {"roles": sorted(roles), "user_id": user_id}
    assigned = {"salt": salt, "secret_hash": hash_secret(salt, secret)}
    return args, assigned


def apply_create_account(state: ProviderState, args: dict, assigned: dict) -> None:
    state.accounts[args["user_id"]] = AccountState(
        roles=set(args["roles"]),
        salt=assigned["salt"],
        secret_hash=assigned["secret_hash"],
    )
    state.next_salt_seq += 1


# --- login / logout / switch_role --------------------------------------------


def plan_login(
    state: ProviderState, seed: str, user_id: str, secret: str, role: str | None
) -> tuple[dict, dict]:
    if not isinstance(user_id, str) or not isinstance(secret, str):
        raise unauthorized(BAD_CREDENTIALS)
    account = state.accounts.get(user_id)
    if account is None or hash_secret(account.salt, secret) != account.secret_hash:
        raise unauthorized(BAD_CREDENTIALS)
    if role is not None:
        if not isinstance(role, str) or role not in account.roles:
            raise forbidden(f"account does not hold role {role!r}")
        active = role
    else:
        active = next(r.value for r in ROLE_ORDER if r.value in account.roles)
    token = derive_hex(seed, "token", state.next_token_seq, TOKEN_HEX_LEN)
    args = {"role": role, "user_id": user_id}
    assigned = {"active_role": active, "token": token}
    return args, assigned


def apply_login(state: ProviderState, tick: int, args: dict, assigned: dict) -> None:
    state.sessions[assigned["token"]] = SessionState(
        user_id=args["user_id"],
        active_role=assigned["active_role"],
        created_at_tick=tick,
    )
    state.next_token_seq += 1


def plan_logout(
    state: ProviderState, token: str | None, tick: int, expiry_ticks: int | None
) -> tuple[dict, dict]:
    resolve_session(state, token, tick, expiry_ticks)
    return {"token": token}, {}


def apply_logout(state: ProviderState, args: dict, assigned: dict) -> None:
    state.sessions[args["token"]].expired = True


def plan_switch_role(
    state: ProviderState, token: str | None, role: str, tick: int, expiry_ticks: int | None
) -> tuple[dict, dict]:
    session = resolve_session(state, token, tick, expiry_ticks)
    if role not in (r.value for r in Role):
        raise validation_error(f"unknown role {role!r}")
    if role not in state.accounts[session.user_id].roles:
        raise forbidden(f"account does not hold role {role}")
    return {"role": role, "token": token}, {}


def apply_switch_role(state: ProviderState, args: dict, assigned: dict) -> None:
    state.sessions[args["token"]].active_role = args["role"]


# --- service catalog -----------------------------------------------------------


def plan_request_service(
    state: ProviderState,
    capabilities_of,
    catalog: dict[str, str],
    token: str | None,
    service_id: str,
    tick: int,
    expiry_ticks: int | None,
) -> tuple[dict, dict]:
    session = authorize(
        state, capabilities_of, token, Capability.SERVICE_REQUEST, tick, expiry_ticks
    )
    if service_id not in catalog:
        raise CloudError(ErrorCode.NOT_FOUND, f"no such service {service_id}")
    return {"service_id": service_id, "token": token}, {"user_id": session.user_id}


def apply_request_service(state: ProviderState, args: dict, assigned: dict) -> None:
    state.accounts[assigned["user_id"]].requested_services.add(args["service_id"])


def list_entitled_services(
    state: ProviderState,
    capabilities_of,
    catalog: dict[str, str],
    token: str | None,
    tick: int,
    expiry_ticks: int | None,
) -> list[dict]:
    """Exactly the requested subset of the catalog, never the full catalog."""
    session = authorize(
        state, capabilities_of, token, Capability.SERVICE_REQUEST, tick, expiry_ticks
    )
    requested = state.accounts[session.user_id].requested_services
    return [
        {"description": catalog[sid], "id": sid}
        for sid in sorted(requested)
        if sid in catalog
    ]


# --- billing ---------------------------------------------------------------------


def billing_statement(usage: dict, rate_micro_per_mib_tick: int) -> dict:
    """Price a usage report: micro-credits = MiB-ticks x rate, all integers."""
    per_node = {
        nid: {
            "mib_ticks": mib_ticks,
            "micro_credits": mib_ticks * rate_micro_per_mib_tick,
        }
        for nid, mib_ticks in usage["per_node_mib_ticks"].items()
    }
    return {
        "from_tick": usage["from_tick"],
        "per_node": per_node,
        "rate_micro_per_mib_tick": rate_micro_per_mib_tick,
        "to_tick": usage["to_tick"],
        "total_micro_credits": usage["total_mib_ticks"] * rate_micro_per_mib_tick,
    }
