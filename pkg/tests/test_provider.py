import random
import re

import pytest

from campuscloud.core import Capability, CloudError, ErrorCode
from conftest import Actors, make_system

MIB = 1 << 20


class TestCreateAccount:
    def test_requires_admin_accounts_capability(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.create_account(actors.staff, "newguy", ["Student"], "pw")
        assert err.value.code is ErrorCode.FORBIDDEN

    def test_duplicate_rejected_state_unchanged(self, actors):
        s = actors.system
        s.create_account(actors.admin, "S1001", ["Student"], "pw")
        before = s.state_digest()
        log_len = s.log.last_seq
        with pytest.raises(CloudError) as err:
            s.create_account(actors.admin, "S1001", ["Student"], "pw2")
        assert err.value.code is ErrorCode.DUPLICATE_ID
        assert s.state_digest() == before
        assert s.log.last_seq == log_len

    def test_empty_roles_rejected(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.create_account(actors.admin, "newguy", [], "pw")
        assert err.value.code is ErrorCode.VALIDATION

    def test_unknown_role_rejected(self, actors):
        with pytest.raises(CloudError):
            actors.system.create_account(actors.admin, "newguy", ["Wizard"], "pw")

    def test_secret_never_stored_in_clear(self, actors):
        s = actors.system
        s.create_account(actors.admin, "private1", ["Student"], "hunter2")
        account = s.state.provider.accounts["private1"]
        assert "hunter2" not in account.secret_hash
        assert "hunter2" not in account.salt
        for entry in s.log.entries:
            assert "hunter2" not in entry.encode().decode("utf-8")


class TestLogin:
    def test_token_is_32_hex(self, actors):
        token = actors.system.login("stu1", "pw-stu")["token"]
        assert re.fullmatch(r"[0-9a-f]{32}", token)

    def test_wrong_secret_unauthorized(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.login("stu1", "nope")
        assert err.value.code is ErrorCode.UNAUTHORIZED

    def test_unknown_user_same_error_as_wrong_secret(self, actors):
        with pytest.raises(CloudError) as wrong:
            actors.system.login("stu1", "nope")
        with pytest.raises(CloudError) as unknown:
            actors.system.login("ghost99", "nope")
        assert unknown.value.code is wrong.value.code is ErrorCode.UNAUTHORIZED
        assert unknown.value.message == wrong.value.message

    def test_single_role_becomes_active(self, actors):
        out = actors.system.login("staff1", "pw-staff")
        assert out["active_role"] == "Staff"

    def test_explicit_role_param(self, system):
        system.bootstrap_account("dualie", ["Student", "Staff"], "pw")
        out = system.login("dualie", "pw", role="Staff")
        assert out["active_role"] == "Staff"
        assert out["roles"] == ["Staff", "Student"]

    def test_multi_role_default_is_canonical_order(self, system):
        system.bootstrap_account("dualie", ["Staff", "Student"], "pw")
        assert system.login("dualie", "pw")["active_role"] == "Student"

    def test_role_not_held_forbidden(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.login("stu1", "pw-stu", role="Admin")
        assert err.value.code is ErrorCode.FORBIDDEN

    def test_tokens_unique_across_sessions(self, actors):
        tokens = {actors.system.login("stu1", "pw-stu")["token"] for _ in range(20)}
        assert len(tokens) == 20


class TestSwitchRole:
    def test_switch_changes_authorization(self, system):
        system.bootstrap_account("dualie", ["Student", "Staff"], "pw")
        token = system.login("dualie", "pw")["token"]
        assert not system.authorize_query(token, Capability.STUDENT_INSERT)["allowed"]
        system.switch_role(token, "Staff")
        assert system.authorize_query(token, Capability.STUDENT_INSERT)["allowed"]

    def test_switch_to_unheld_role_forbidden(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.switch_role(actors.student, "Staff")
        assert err.value.code is ErrorCode.FORBIDDEN

    def test_invalid_token_unauthorized(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.switch_role("f" * 32, "Student")
        assert err.value.code is ErrorCode.UNAUTHORIZED


class TestAuthorize:
    def test_matrix_matches_capability_table(self, actors):
        s = actors.system
        tokens = {"Student": actors.student, "Staff": actors.staff, "Admin": actors.admin}
        for role, token in tokens.items():
            held = s.config.capabilities(role)
            for cap in Capability:
                result = s.authorize_query(token, cap)
                assert result["allowed"] == (cap.value in held), (role, cap)
                if not result["allowed"]:
                    assert result["reason"] == "FORBIDDEN"

    def test_expired_session_denied(self, actors):
        s = actors.system
        s.logout(actors.student)
        result = s.authorize_query(actors.student, Capability.STUDENT_READ_SELF)
        assert result == {"allowed": False, "reason": "UNAUTHORIZED"}

    def test_session_expiry_by_clock(self):
        sys_ = make_system(session_expiry_ticks=5)
        a = Actors(sys_)
        a.add_nodes(1)
        assert sys_.authorize_query(a.student, Capability.STUDENT_READ_SELF)["allowed"]
        sys_.advance_clock(a.admin, 5)
        result = sys_.authorize_query(a.student, Capability.STUDENT_READ_SELF)
        assert result == {"allowed": False, "reason": "UNAUTHORIZED"}

    def test_token_unforgeability_random_probes(self, actors):
        rng = random.Random(42)
        s = actors.system
        issued = set(s.state.provider.sessions)
        for _ in range(300):
            probe = "".join(rng.choice("0123456789abcdef") for _ in range(32))
            if probe in issued:
                continue
            assert not s.authorize_query(probe, Capability.STUDENT_READ_SELF)["allowed"]


class TestLogout:
    def test_logout_invalidates(self, actors):
        actors.system.logout(actors.student)
        with pytest.raises(CloudError) as err:
            actors.system.retrieve_student_self(actors.student)
        assert err.value.code is ErrorCode.UNAUTHORIZED

    def test_double_logout_unauthorized(self, actors):
        actors.system.logout(actors.student)
        with pytest.raises(CloudError) as err:
            actors.system.logout(actors.student)
        assert err.value.code is ErrorCode.UNAUTHORIZED

    def test_other_sessions_unaffected(self, actors):
        second = actors.system.login("stu1", "pw-stu")["token"]
        actors.system.logout(actors.student)
        assert actors.system.authorize_query(second, Capability.STUDENT_READ_SELF)["allowed"]


class TestServices:
    def test_fresh_account_sees_nothing(self, actors):
        assert actors.system.list_entitled_services(actors.student) == []

    def test_requested_service_exactly_visible(self, actors):
        s = actors.system
        s.request_service(actors.student, "matlab-saas")
        services = s.list_entitled_services(actors.student)
        assert [e["id"] for e in services] == ["matlab-saas"]
        assert services[0]["description"]

    def test_unknown_service_not_found(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.request_service(actors.student, "xyz")
        assert err.value.code is ErrorCode.NOT_FOUND
        assert actors.system.list_entitled_services(actors.student) == []

    def test_admin_lacks_service_request(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.list_entitled_services(actors.admin)
        assert err.value.code is ErrorCode.FORBIDDEN

    def test_entitlement_subset_over_random_sequences(self, actors):
        rng = random.Random(17)
        s = actors.system
        catalog = set(s.config.catalog)
        requested = set()
        for _ in range(100):
            sid = rng.choice(sorted(catalog) + ["bogus-1", "bogus-2"])
            try:
                s.request_service(actors.student, sid)
                requested.add(sid)
            except CloudError as err:
                assert err.code is ErrorCode.NOT_FOUND
            visible = {e["id"] for e in s.list_entitled_services(actors.student)}
            assert visible == requested & catalog


class TestBilling:
    def test_requires_billing_capability(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.compute_bill(actors.staff, 0, 10)
        assert err.value.code is ErrorCode.FORBIDDEN

    def test_empty_range_zero(self, actors):
        bill = actors.system.compute_bill(actors.admin, 0, 100)
        assert bill["total_micro_credits"] == 0

    def test_four_mib_two_replicas_ten_ticks(self, actors):
        s = actors.system
        s.upload_material(actors.staff, "cs101", b"\xab" * (4 * MIB))
        s.advance_clock(actors.admin, 10)
        bill = s.compute_bill(actors.admin, 0, 10)
        assert bill["total_micro_credits"] == 80

    def test_inverted_range_rejected(self, actors):
        with pytest.raises(CloudError) as err:
            actors.system.compute_bill(actors.admin, 10, 0)
        assert err.value.code is ErrorCode.VALIDATION

    def test_linearity(self, actors):
        rng = random.Random(23)
        s = actors.system
        for _ in range(8):
            s.upload_material(actors.staff, "cs101", rng.randbytes(rng.randint(1, 2 * MIB)))
            s.advance_clock(actors.admin, rng.randint(1, 4))
        end = s.state.cluster.tick
        for a, b in [(0, 5), (3, 9), (0, end), (2, 2)]:
            b = min(b, end)
            total = s.compute_bill(actors.admin, 0, end)["total_micro_credits"]
            left = s.compute_bill(actors.admin, 0, a)["total_micro_credits"]
            mid = s.compute_bill(actors.admin, a, b)["total_micro_credits"]
            right = s.compute_bill(actors.admin, b, end)["total_micro_credits"]
            assert left + mid + right == total
