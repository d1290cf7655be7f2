import hashlib
import re

import pytest
from hypothesis import given, strategies as st

from campuscloud.core import (
    CloudError,
    ErrorCode,
    StaffRecord,
    StudentRecord,
    canonical_bytes,
    canonical_dumps,
    state_digest,
    validate_user_id,
)

USER_ID_ORACLE = re.compile(r"^[A-Za-z0-9_-]{3,32}$")

# SHA-256 of two canonical states differing in a single field, computed with
# the sha256sum tool over the literal strings below.
STATE_V1 = '{"records":{"S1001":{"contact":"a@b","name":"Meera","version":1}}}'
STATE_V2 = '{"records":{"S1001":{"contact":"a@b","name":"Meera","version":2}}}'
DIGEST_V1 = "85eef0dfc0f881596b3db98c41c736ddea3f65f6df6a89293c3d614b2cb58bfc"
DIGEST_V2 = "7fe8e273c047461667a59710ac2941947efd5e95231887fba597e8d5e37ed422"


class TestValidateUserId:
    def test_accepts_simple_id(self):
        assert validate_user_id("S1001") == "S1001"

    def test_rejects_too_short(self):
        with pytest.raises(CloudError) as err:
            validate_user_id("ab")
        assert err.value.code is ErrorCode.VALIDATION

    def test_rejects_illegal_character(self):
        with pytest.raises(CloudError) as err:
            validate_user_id("has space")
        assert err.value.code is ErrorCode.VALIDATION

    def test_rejects_too_long(self):
        with pytest.raises(CloudError):
            validate_user_id("x" * 33)

    def test_boundaries(self):
        assert validate_user_id("abc") == "abc"
        assert validate_user_id("x" * 32) == "x" * 32

    @given(st.text(max_size=40))
    def test_matches_pattern_oracle(self, s):
        ok = bool(USER_ID_ORACLE.match(s))
        if ok:
            assert validate_user_id(s) == s
        else:
            with pytest.raises(CloudError):
                validate_user_id(s)

    @given(st.text(alphabet=st.sampled_from("AZaz09_- .@/"), min_size=0, max_size=36))
    def test_dense_alphabet_oracle(self, s):
        ok = bool(USER_ID_ORACLE.match(s))
        if ok:
            assert validate_user_id(s) == s
        else:
            with pytest.raises(CloudError):
                validate_user_id(s)


class TestCanonicalSerialization:
    def test_sorted_keys_no_whitespace(self):
        assert canonical_dumps({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_utf8_not_escaped(self):
        assert canonical_bytes({"name": "José"}) == '{"name":"José"}'.encode("utf-8")

    def test_floats_rejected(self):
        with pytest.raises(CloudError):
            canonical_dumps({"x": 1.5})

    def test_non_string_keys_rejected(self):
        with pytest.raises(CloudError):
            canonical_dumps({1: "x"})

    def test_nested_floats_rejected(self):
        with pytest.raises(CloudError):
            canonical_dumps({"a": [{"b": [0.1]}]})


class TestStateDigest:
    def test_pure(self):
        state = {"a": {"b": [1, 2, 3]}, "c": "x"}
        assert state_digest(state) == state_digest({"c": "x", "a": {"b": [1, 2, 3]}})

    def test_one_field_change_changes_digest(self):
        a = {"records": {"S1001": {"contact": "a@b", "name": "Meera", "version": 1}}}
        b = {"records": {"S1001": {"contact": "a@b", "name": "Meera", "version": 2}}}
        assert canonical_dumps(a) == STATE_V1
        assert canonical_dumps(b) == STATE_V2
        assert state_digest(a) == DIGEST_V1
        assert state_digest(b) == DIGEST_V2
        assert DIGEST_V1 != DIGEST_V2

    def test_digest_is_sha256_of_canonical_bytes(self):
        state = {"k": [1, "two", None, True]}
        expect = hashlib.sha256(canonical_dumps(state).encode("utf-8")).hexdigest()
        assert state_digest(state) == expect

    @given(
        st.dictionaries(
            st.text(max_size=8),
            st.one_of(st.integers(), st.text(max_size=8), st.booleans(), st.none()),
            max_size=6,
        )
    )
    def test_deterministic_over_key_order(self, d):
        items = list(d.items())
        assert state_digest(dict(items)) == state_digest(dict(reversed(items)))


class TestRecords:
    def test_student_roundtrip(self):
        rec = StudentRecord("S1001", "Meera K", "BSc CS", 2, "m@x.e", 1)
        assert StudentRecord.from_doc(rec.to_doc()) == rec

    def test_student_rejects_year_zero(self):
        with pytest.raises(CloudError):
            StudentRecord("S1001", "Meera", "BSc", 0, "c").validate()

    def test_student_rejects_empty_name(self):
        with pytest.raises(CloudError):
            StudentRecord("S1001", "", "BSc", 1, "c").validate()

    def test_student_rejects_long_name(self):
        with pytest.raises(CloudError):
            StudentRecord("S1001", "x" * 129, "BSc", 1, "c").validate()

    def test_staff_validates_user_id(self):
        with pytest.raises(CloudError):
            StaffRecord("a", "Name", "CS").validate()
        assert StaffRecord("T900", "Name", "CS").validate().user_id == "T900"
