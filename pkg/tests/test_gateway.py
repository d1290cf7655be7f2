import itertools

import pytest
from fastapi.testclient import TestClient

from campuscloud.gateway import ENDPOINTS, create_app
from conftest import make_system, student_record


@pytest.fixture
def client():
    system = make_system()
    system.bootstrap_account("admin", ["Admin"], "pw-admin")
    with TestClient(create_app(system), raise_server_exceptions=False) as c:
        c.system = system
        yield c


def login(client, user, secret, role=None):
    body = {"secret": secret, "user_id": user}
    if role:
        body["role"] = role
    resp = client.post("/api/v1/login", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()["token"]


def auth(token):
    return {"Authorization": f"Bearer {token}"}


@pytest.fixture
def tokens(client):
    admin = login(client, "admin", "pw-admin")
    for i in range(3):
        client.post("/api/v1/admin/nodes", json={"capacity_bytes": 1 << 30},
                    headers=auth(admin))
    client.post("/api/v1/admin/accounts", headers=auth(admin),
                json={"roles": ["Staff"], "secret": "pw-s", "user_id": "staff1"})
    client.post("/api/v1/admin/accounts", headers=auth(admin),
                json={"roles": ["Student"], "secret": "pw-u", "user_id": "stu1"})
    return {
        "admin": admin,
        "staff": login(client, "staff1", "pw-s"),
        "student": login(client, "stu1", "pw-u"),
    }


class TestAuthSurface:
    def test_no_token_is_401(self, client):
        resp = client.get("/api/v1/students/S1001")
        assert resp.status_code == 401
        assert resp.json()["code"] == "UNAUTHORIZED"

    def test_garbage_token_is_401(self, client):
        resp = client.get("/api/v1/students/S1001", headers=auth("f" * 32))
        assert resp.status_code == 401

    def test_wrong_secret_is_401(self, client):
        resp = client.post("/api/v1/login", json={"secret": "no", "user_id": "admin"})
        assert resp.status_code == 401

    def test_malformed_json_is_400(self, client):
        resp = client.post("/api/v1/login", content=b"{oops",
                           headers={"Content-Type": "application/json"})
        assert resp.status_code == 400
        assert resp.json()["code"] == "VALIDATION"

    def test_health_is_public(self, client):
        resp = client.get("/api/v1/health")
        assert resp.status_code == 200
        assert resp.json()["ok"] is True

    def test_digest_is_public(self, client):
        resp = client.get("/api/v1/digest")
        assert resp.status_code == 200
        assert len(resp.json()["state_digest"]) == 64


class TestStudentEndpoints:
    def test_duplicate_insert_409_digest_unchanged(self, client, tokens):
        rec = student_record("S1001")
        assert client.post("/api/v1/students", json=rec,
                           headers=auth(tokens["staff"])).status_code == 200
        before = client.get("/api/v1/digest").json()["state_digest"]
        resp = client.post("/api/v1/students", json=rec, headers=auth(tokens["staff"]))
        assert resp.status_code == 409
        assert resp.json()["code"] == "DUPLICATE_ID"
        assert client.get("/api/v1/digest").json()["state_digest"] == before

    def test_absent_student_404_no_user_found(self, client, tokens):
        resp = client.get("/api/v1/students/S9999", headers=auth(tokens["staff"]))
        assert resp.status_code == 404
        assert resp.json() == {"code": "NOT_FOUND", "message": "No user found"}

    def test_retrieve_and_patch(self, client, tokens):
        client.post("/api/v1/students", json=student_record("S1001"),
                    headers=auth(tokens["staff"]))
        got = client.get("/api/v1/students/S1001", headers=auth(tokens["staff"])).json()
        assert got["user_id"] == "S1001"
        resp = client.patch("/api/v1/students/S1001", json={"year": 3},
                            headers=auth(tokens["staff"]))
        assert resp.json() == {"user_id": "S1001", "version": 2}

    def test_self_route(self, client, tokens):
        client.post("/api/v1/students", json=student_record("stu1"),
                    headers=auth(tokens["staff"]))
        got = client.get("/api/v1/students/self", headers=auth(tokens["student"])).json()
        assert got["user_id"] == "stu1"

    def test_student_foreign_read_403(self, client, tokens):
        client.post("/api/v1/students", json=student_record("S1001"),
                    headers=auth(tokens["staff"]))
        resp = client.get("/api/v1/students/S1001", headers=auth(tokens["student"]))
        assert resp.status_code == 403


class TestBinaryEndpoints:
    def test_assignment_upload_listing(self, client, tokens):
        resp = client.post(
            "/api/v1/courses/cs101/assignments", content=b"my work",
            headers={**auth(tokens["student"]), "Content-Type": "application/octet-stream"},
        )
        assert resp.status_code == 200
        out = resp.json()
        assert out["assignment_id"] == "asg-1"
        subs = client.get("/api/v1/courses/cs101/submissions",
                          headers=auth(tokens["staff"])).json()["submissions"]
        assert [s["id"] for s in subs] == ["asg-1"]

    def test_material_roundtrip(self, client, tokens):
        payload = bytes(range(256)) * 4
        up = client.post("/api/v1/courses/cs101/materials", content=payload,
                         headers=auth(tokens["staff"]))
        assert up.status_code == 200
        mid = up.json()["material_id"]
        down = client.get(f"/api/v1/courses/cs101/materials/{mid}",
                          headers=auth(tokens["student"]))
        assert down.status_code == 200
        assert down.content == payload
        assert down.headers["content-type"] == "application/octet-stream"

    def test_oversized_upload_400(self, tokens, client):
        client.system.config.max_upload_bytes = 64
        resp = client.post("/api/v1/courses/cs101/assignments", content=b"x" * 65,
                           headers=auth(tokens["student"]))
        assert resp.status_code == 400
        client.system.config.max_upload_bytes = 32 * (1 << 20)

    def test_empty_upload_400(self, client, tokens):
        resp = client.post("/api/v1/courses/cs101/assignments", content=b"",
                           headers=auth(tokens["student"]))
        assert resp.status_code == 400

    def test_grade_endpoint(self, client, tokens):
        client.post("/api/v1/courses/cs101/assignments", content=b"w",
                    headers=auth(tokens["student"]))
        resp = client.post("/api/v1/assignments/asg-1/grade", json={"grade": "A"},
                           headers=auth(tokens["staff"]))
        assert resp.status_code == 200
        subs = client.get("/api/v1/courses/cs101/submissions",
                          headers=auth(tokens["staff"])).json()["submissions"]
        assert subs[0]["grade"] == "A"


class TestSessionEndpoints:
    def test_role_switch_flow(self, client, tokens):
        client.post("/api/v1/admin/accounts", headers=auth(tokens["admin"]),
                    json={"roles": ["Staff", "Student"], "secret": "pw", "user_id": "dual1"})
        token = login(client, "dual1", "pw")
        resp = client.post("/api/v1/session/role", json={"role": "Staff"},
                           headers=auth(token))
        assert resp.json() == {"active_role": "Staff"}
        resp = client.post("/api/v1/session/role", json={"role": "Admin"},
                           headers=auth(token))
        assert resp.status_code == 403

    def test_logout_then_401(self, client, tokens):
        assert client.post("/api/v1/logout",
                           headers=auth(tokens["student"])).status_code == 200
        resp = client.get("/api/v1/students/self", headers=auth(tokens["student"]))
        assert resp.status_code == 401

    def test_login_reports_roles(self, client, tokens):
        client.post("/api/v1/admin/accounts", headers=auth(tokens["admin"]),
                    json={"roles": ["Staff", "Student"], "secret": "pw", "user_id": "dual2"})
        resp = client.post("/api/v1/login", json={"secret": "pw", "user_id": "dual2"})
        body = resp.json()
        assert body["roles"] == ["Staff", "Student"]
        assert body["active_role"] == "Student"


class TestServiceEndpoints:
    def test_request_then_list(self, client, tokens):
        assert client.get("/api/v1/services",
                          headers=auth(tokens["student"])).json() == {"services": []}
        resp = client.post("/api/v1/services/request", json={"service_id": "matlab-saas"},
                           headers=auth(tokens["student"]))
        assert resp.json() == {"requested": ["matlab-saas"]}
        services = client.get("/api/v1/services",
                              headers=auth(tokens["student"])).json()["services"]
        assert [s["id"] for s in services] == ["matlab-saas"]

    def test_unknown_service_404(self, client, tokens):
        resp = client.post("/api/v1/services/request", json={"service_id": "nope"},
                           headers=auth(tokens["student"]))
        assert resp.status_code == 404


class TestAdminEndpoints:
    def test_node_lifecycle_and_health(self, client, tokens):
        resp = client.post("/api/v1/admin/nodes", json={"capacity_bytes": 1 << 20},
                           headers=auth(tokens["admin"]))
        node = resp.json()["node_id"]
        resp = client.post(f"/api/v1/admin/nodes/{node}/status", json={"status": "Down"},
                           headers=auth(tokens["admin"]))
        assert resp.json() == {"node_id": node, "status": "Down"}
        health = client.get("/api/v1/health").json()
        assert health["up_nodes"] == 3

    def test_unknown_node_404(self, client, tokens):
        resp = client.post("/api/v1/admin/nodes/n99/status", json={"status": "Down"},
                           headers=auth(tokens["admin"]))
        assert resp.status_code == 404

    def test_clock_usage_bill(self, client, tokens):
        client.post("/api/v1/courses/cs101/materials", content=b"\0" * (4 << 20),
                    headers=auth(tokens["staff"]))
        resp = client.post("/api/v1/admin/clock/advance", json={"ticks": 10},
                           headers=auth(tokens["admin"]))
        assert resp.json() == {"tick": 10}
        usage = client.get("/api/v1/admin/usage?from=0&to=10",
                           headers=auth(tokens["admin"])).json()
        assert usage["total_mib_ticks"] == 80
        bill = client.get("/api/v1/admin/bill?from=0&to=10",
                          headers=auth(tokens["admin"])).json()
        assert bill["total_micro_credits"] == 80

    def test_bad_query_params_400(self, client, tokens):
        resp = client.get("/api/v1/admin/bill?from=zero&to=10",
                          headers=auth(tokens["admin"]))
        assert resp.status_code == 400

    def test_rereplicate_endpoint(self, client, tokens):
        client.post("/api/v1/courses/cs101/materials", content=b"notes",
                    headers=auth(tokens["staff"]))
        resp = client.post("/api/v1/admin/rereplicate", headers=auth(tokens["admin"]))
        assert resp.status_code == 200
        assert resp.json()["repaired"] == 0

    def test_capacity_exceeded_is_507(self, client, tokens):
        small = client.post("/api/v1/admin/nodes", json={"capacity_bytes": 1024},
                            headers=auth(tokens["admin"])).json()["node_id"]
        for node in ("n1", "n2", "n3"):
            client.post(f"/api/v1/admin/nodes/{node}/status", json={"status": "Down"},
                        headers=auth(tokens["admin"]))
        resp = client.post("/api/v1/courses/cs101/materials", content=b"x" * 2048,
                           headers=auth(tokens["staff"]))
        assert resp.status_code in (507, 503)
        assert resp.json()["code"] in ("CAPACITY_EXCEEDED", "INSUFFICIENT_NODES")


class TestJunkResilience:
    """Garbage bodies must map to 4xx errors, never a 500."""

    JUNK_BODIES = [
        {},
        {"user_id": 123, "secret": [1, 2], "roles": 7, "role": {}, "service_id": 9,
         "status": 1, "ticks": "soon", "capacity_bytes": "big", "grade": 4,
         "name": None, "year": "two", "contact": 8, "program": [], "patch": 3},
        {"roles": "Student", "secret": None, "year": True},
    ]

    def test_every_endpoint_survives_junk(self, client, tokens):
        for ep, junk in itertools.product(ENDPOINTS, self.JUNK_BODIES):
            path = ("/api/v1" + ep.path
                    .replace("{id}", "S1001" if "students" in ep.path else "asg-1")
                    .replace("{c}", "cs101")
                    .replace("{m}", "mat-1"))
            for token in (None, tokens["admin"], tokens["staff"], tokens["student"]):
                headers = auth(token) if token else {}
                if ep.method == "GET":
                    resp = client.get(path, headers=headers)
                else:
                    resp = client.request(ep.method, path, json=junk, headers=headers)
                assert resp.status_code < 500, (ep.method, path, junk, resp.text)

    def test_bogus_content_length_not_fatal(self, client, tokens):
        resp = client.post("/api/v1/courses/cs101/assignments", content=b"ok",
                           headers={**auth(tokens["student"]), "content-length": "2"})
        assert resp.status_code == 200

    def test_valid_login_with_junk_role(self, client, tokens):
        resp = client.post("/api/v1/login",
                           json={"user_id": "stu1", "secret": "pw-u", "role": {"x": 1}})
        assert resp.status_code == 403
