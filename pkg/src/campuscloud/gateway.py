"""Wire API: every input and output of the system flows through these
JSON-over-HTTP routes, shared by the CLI, the tests, and the web UI.

Mutations serialize through the system's writer; reads stay responsive
while a mutation is in flight (handlers run in a threadpool under a
readers-writer lock). Assignment and material uploads travel as raw binary
bodies capped by ``max_upload_bytes``; everything else is JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from fastapi import APIRouter, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from .core import Capability, CloudError, ErrorCode, validation_error
from .system import System

API_PREFIX = "/api/v1"

HTTP_STATUS = {
    ErrorCode.DUPLICATE_ID: 409,
    ErrorCode.NOT_FOUND: 404,
    ErrorCode.FORBIDDEN: 403,
    ErrorCode.UNAUTHORIZED: 401,
    ErrorCode.VALIDATION: 400,
    ErrorCode.CAPACITY_EXCEEDED: 507,
    ErrorCode.INSUFFICIENT_NODES: 503,
    ErrorCode.DEGRADED: 503,
    ErrorCode.REPLAY_ERROR: 500,
}


@dataclass(frozen=True)
class EndpointSpec:
    """One wire endpoint and what authorizes it (drives the probe matrix).

    ``capabilities`` is any-of; empty means no capability is required.
    ``needs_session`` distinguishes public endpoints from ones any live
    session may call.
    """

    method: str
    path: str
    capabilities: tuple[str, ...] = ()
    needs_session: bool = True


ENDPOINTS: tuple[EndpointSpec, ...] = (
    EndpointSpec("POST", "/login", needs_session=False),
    EndpointSpec("POST", "/logout"),
    EndpointSpec("POST", "/session/role"),
    EndpointSpec("GET", "/services", (Capability.SERVICE_REQUEST.value,)),
    EndpointSpec("POST", "/services/request", (Capability.SERVICE_REQUEST.value,)),
    EndpointSpec("POST", "/students", (Capability.STUDENT_INSERT.value,)),
    # Probed with a foreign id; the self-scoped alternative is the /self route.
    EndpointSpec("GET", "/students/{id}", (Capability.STUDENT_RETRIEVE_ANY.value,)),
    EndpointSpec("PATCH", "/students/{id}", (Capability.STUDENT_UPDATE_ANY.value,)),
    EndpointSpec(
        "GET",
        "/students/self",
        (Capability.STUDENT_READ_SELF.value, Capability.STUDENT_RETRIEVE_ANY.value),
    ),
    EndpointSpec("POST", "/courses/{c}/assignments", (Capability.ASSIGNMENT_SUBMIT.value,)),
    EndpointSpec("GET", "/courses/{c}/submissions", (Capability.SUBMISSION_LIST.value,)),
    EndpointSpec("POST", "/courses/{c}/materials", (Capability.MATERIAL_UPLOAD.value,)),
    EndpointSpec("GET", "/courses/{c}/materials/{m}", (Capability.MATERIAL_DOWNLOAD.value,)),
    EndpointSpec("POST", "/assignments/{id}/grade", (Capability.GRADE_RECORD.value,)),
    EndpointSpec("POST", "/admin/nodes", (Capability.ADMIN_NODE_OPS.value,)),
    EndpointSpec("POST", "/admin/nodes/{id}/status", (Capability.ADMIN_NODE_OPS.value,)),
    EndpointSpec("POST", "/admin/rereplicate", (Capability.ADMIN_NODE_OPS.value,)),
    EndpointSpec("POST", "/admin/clock/advance", (Capability.ADMIN_CLOCK.value,)),
    EndpointSpec("GET", "/admin/usage", (Capability.ADMIN_BILLING.value,)),
    EndpointSpec("GET", "/admin/bill", (Capability.ADMIN_BILLING.value,)),
    EndpointSpec("POST", "/admin/accounts", (Capability.ADMIN_ACCOUNTS.value,)),
    EndpointSpec("GET", "/health", needs_session=False),
    EndpointSpec("GET", "/digest", needs_session=False),
)


def bearer_token(request: Request) -> str | None:
    header = request.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[7:].strip()
    return None


async def json_body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        parsed = json.loads(raw)
    except ValueError:
        raise validation_error("request body is not valid JSON")
    if not isinstance(parsed, dict):
        raise validation_error("request body must be a JSON object")
    return parsed


def _int_param(params, name: str) -> int:
    value = params.get(name)
    if value is None:
        raise validation_error(f"missing query parameter {name}")
    try:
        return int(value)
    except ValueError:
        raise validation_error(f"{name} must be an integer")


def create_app(system: System, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="campuscloud", docs_url=None, redoc_url=None)
    app.state.system = system
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    router = APIRouter(prefix=API_PREFIX)

    @app.exception_handler(CloudError)
    async def cloud_error_handler(_request, exc: CloudError):
        return JSONResponse(
            status_code=HTTP_STATUS[exc.code],
            content={"code": exc.code.value, "message": exc.message},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request, exc):
        return JSONResponse(
            status_code=400,
            content={"code": ErrorCode.VALIDATION.value, "message": str(exc)},
        )

    # --- sessions ---------------------------------------------------------

    @router.post("/login")
    async def login(request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.login, body.get("user_id", ""), body.get("secret", ""), body.get("role")
        )

    @router.post("/logout")
    async def logout(request: Request):
        return await run_in_threadpool(system.logout, bearer_token(request))

    @router.post("/session/role")
    async def switch_role(request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.switch_role, bearer_token(request), body.get("role", "")
        )

    # --- services ---------------------------------------------------------

    @router.get("/services")
    async def list_services(request: Request):
        services = await run_in_threadpool(
            system.list_entitled_services, bearer_token(request)
        )
        return {"services": services}

    @router.post("/services/request")
    async def request_service(request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.request_service, bearer_token(request), body.get("service_id", "")
        )

    # --- students -----------------------------------------------------------

    @router.post("/students")
    async def insert_student(request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.insert_student, bearer_token(request), body
        )

    @router.get("/students/self")
    async def retrieve_self(request: Request):
        return await run_in_threadpool(
            system.retrieve_student_self, bearer_token(request)
        )

    @router.get("/students/{user_id}")
    async def retrieve_student(user_id: str, request: Request):
        return await run_in_threadpool(
            system.retrieve_student, bearer_token(request), user_id
        )

    @router.patch("/students/{user_id}")
    async def update_student(user_id: str, request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.update_student, bearer_token(request), user_id, body
        )

    # --- courses ---------------------------------------------------------------

    async def _binary_body(request: Request) -> bytes:
        length = request.headers.get("content-length")
        if length is not None and length.isdigit() and int(length) > system.config.max_upload_bytes:
            raise validation_error(
                f"payload exceeds limit {system.config.max_upload_bytes}"
            )
        return await request.body()

    @router.post("/courses/{course}/assignments")
    async def submit_assignment(course: str, request: Request):
        payload = await _binary_body(request)
        return await run_in_threadpool(
            system.submit_assignment, bearer_token(request), course, payload
        )

    @router.get("/courses/{course}/submissions")
    async def list_submissions(course: str, request: Request):
        submissions = await run_in_threadpool(
            system.list_submissions, bearer_token(request), course
        )
        return {"submissions": submissions}

    @router.post("/courses/{course}/materials")
    async def upload_material(course: str, request: Request):
        payload = await _binary_body(request)
        return await run_in_threadpool(
            system.upload_material, bearer_token(request), course, payload
        )

    @router.get("/courses/{course}/materials/{material_id}")
    async def download_material(course: str, material_id: str, request: Request):
        payload = await run_in_threadpool(
            system.download_material, bearer_token(request), course, material_id
        )
        return Response(content=payload, media_type="application/octet-stream")

    @router.post("/assignments/{assignment_id}/grade")
    async def record_grade(assignment_id: str, request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.record_grade, bearer_token(request), assignment_id, body.get("grade", "")
        )

    # --- admin --------------------------------------------------------------------

    @router.post("/admin/accounts")
    async def create_account(request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.create_account,
            bearer_token(request),
            body.get("user_id", ""),
            body.get("roles", []),
            body.get("secret", ""),
        )

    @router.post("/admin/nodes")
    async def add_node(request: Request):
        body = await json_body(request)
        capacity = body.get("capacity_bytes")
        if not isinstance(capacity, int):
            raise validation_error("capacity_bytes must be an integer")
        return await run_in_threadpool(system.add_node, bearer_token(request), capacity)

    @router.post("/admin/nodes/{node_id}/status")
    async def set_node_status(node_id: str, request: Request):
        body = await json_body(request)
        return await run_in_threadpool(
            system.set_node_status, bearer_token(request), node_id, body.get("status", "")
        )

    @router.post("/admin/rereplicate")
    async def rereplicate(request: Request):
        return await run_in_threadpool(system.rereplicate, bearer_token(request))

    @router.post("/admin/clock/advance")
    async def advance_clock(request: Request):
        body = await json_body(request)
        ticks = body.get("ticks")
        if not isinstance(ticks, int):
            raise validation_error("ticks must be an integer")
        return await run_in_threadpool(system.advance_clock, bearer_token(request), ticks)

    @router.get("/admin/usage")
    async def usage(request: Request):
        params = request.query_params
        return await run_in_threadpool(
            system.usage_report,
            bearer_token(request),
            _int_param(params, "from"),
            _int_param(params, "to"),
        )

    @router.get("/admin/bill")
    async def bill(request: Request):
        params = request.query_params
        return await run_in_threadpool(
            system.compute_bill,
            bearer_token(request),
            _int_param(params, "from"),
            _int_param(params, "to"),
        )

    # --- diagnostics ------------------------------------------------------------------

    @router.get("/health")
    async def health():
        return await run_in_threadpool(system.health)

    @router.get("/digest")
    async def digest():
        return {"state_digest": await run_in_threadpool(system.state_digest)}

    app.include_router(router)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
