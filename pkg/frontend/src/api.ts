/** Thin client for the campuscloud wire API (/api/v1). */

export interface ApiFailure {
  code: string;
  message: string;
  status: number;
}

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(failure: ApiFailure) {
    super(failure.message);
    this.code = failure.code;
    this.status = failure.status;
  }
}

export interface LoginResult {
  token: string;
  user_id: string;
  active_role: string;
  roles: string[];
}

export interface StudentRecord {
  user_id: string;
  name: string;
  program: string;
  year: number;
  contact: string;
  version: number;
}

export interface Submission {
  id: string;
  course: string;
  owner: string;
  submitted_at_tick: number;
  size_bytes: number;
  grade: string | null;
}

export interface Health {
  ok: boolean;
  degraded_objects: number;
  up_nodes: number;
}

export class Api {
  constructor(private baseUrl: string, private token: string | null = null) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async call<T>(method: string, path: string, body?: unknown, raw?: Uint8Array): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: string | Uint8Array | undefined;
    if (raw !== undefined) {
      headers["Content-Type"] = "application/octet-stream";
      payload = raw;
    } else if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const resp = await fetch(this.baseUrl + "/api/v1" + path, {
      method,
      headers,
      body: payload as BodyInit | undefined,
    });
    const data = await resp.json();
    if (!resp.ok) {
      throw new ApiError({ code: data.code, message: data.message, status: resp.status });
    }
    return data as T;
  }

  login(userId: string, secret: string): Promise<LoginResult> {
    return this.call("POST", "/login", { user_id: userId, secret });
  }

  logout(): Promise<void> {
    return this.call("POST", "/logout", {});
  }

  switchRole(role: string): Promise<{ active_role: string }> {
    return this.call("POST", "/session/role", { role });
  }

  insertStudent(record: Omit<StudentRecord, "version">): Promise<{ user_id: string; version: number }> {
    return this.call("POST", "/students", record);
  }

  retrieveStudent(userId: string): Promise<StudentRecord> {
    return this.call("GET", `/students/${encodeURIComponent(userId)}`);
  }

  retrieveSelf(): Promise<StudentRecord> {
    return this.call("GET", "/students/self");
  }

  submitAssignment(course: string, payload: Uint8Array): Promise<{ assignment_id: string }> {
    return this.call("POST", `/courses/${encodeURIComponent(course)}/assignments`, undefined, payload);
  }

  listSubmissions(course: string): Promise<{ submissions: Submission[] }> {
    return this.call("GET", `/courses/${encodeURIComponent(course)}/submissions`);
  }

  setNodeStatus(nodeId: string, status: "Up" | "Down"): Promise<{ node_id: string; status: string }> {
    return this.call("POST", `/admin/nodes/${encodeURIComponent(nodeId)}/status`, { status });
  }

  addNode(capacityBytes: number): Promise<{ node_id: string }> {
    return this.call("POST", "/admin/nodes", { capacity_bytes: capacityBytes });
  }

  advanceClock(ticks: number): Promise<{ tick: number }> {
    return this.call("POST", "/admin/clock/advance", { ticks });
  }

  rereplicate(): Promise<{ repaired: number; trimmed: number; degraded: string[] }> {
    return this.call("POST", "/admin/rereplicate", {});
  }

  health(): Promise<Health> {
    return this.call("GET", "/health");
  }

  bill(fromTick: number, toTick: number): Promise<BillingStatement> {
    return this.call("GET", `/admin/bill?from=${fromTick}&to=${toTick}`);
  }
}

export interface BillingStatement {
  from_tick: number;
  to_tick: number;
  total_micro_credits: number;
  rate_micro_per_mib_tick: number;
  per_node: Record<string, { mib_ticks: number; micro_credits: number }>;
}
