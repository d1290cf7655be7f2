/** Single-page client for the university cloud.
 *
 * View flow: Login -> RoleSelect -> role home (students, assignments, or
 * the admin panel). The session token lives in memory only. Every error
 * banner shows the wire error message verbatim, and nothing fetched under
 * one role survives a role switch.
 */

import { Api, ApiError, BillingStatement, StudentRecord, Submission, Health } from "./api.js";
import { clear, el, labeled } from "./dom.js";

export type View =
  | "Login"
  | "RoleSelect"
  | "StudentInsert"
  | "StudentRetrieve"
  | "Assignments"
  | "AdminPanel";

interface Session {
  userId: string;
  activeRole: string;
  roles: string[];
}

const ROLE_HOME: Record<string, View> = {
  Student: "StudentRetrieve",
  Staff: "StudentInsert",
  Admin: "AdminPanel",
};

const VIEWS_BY_ROLE: Record<string, View[]> = {
  Student: ["StudentRetrieve", "Assignments"],
  Staff: ["StudentInsert", "StudentRetrieve", "Assignments"],
  Admin: ["AdminPanel"],
};

export class App {
  view: View = "Login";
  session: Session | null = null;
  banner: { kind: "error" | "ok"; text: string } | null = null;
  /** Data fetched for the current role; dropped on role switch/logout. */
  fetched: {
    record?: StudentRecord;
    submissions?: Submission[];
    health?: Health;
    bill?: BillingStatement;
  } = {};
  insertDraft: Record<string, string> = {};

  constructor(private api: Api, private root: HTMLElement) {}

  start(): void {
    this.render();
  }

  // --- state transitions ------------------------------------------------

  navigate(view: View): void {
    if (view !== "Login" && !this.session) {
      this.view = "Login";
      this.render();
      return;
    }
    this.view = view;
    this.banner = null;
    this.render();
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError) {
      this.banner = { kind: "error", text: err.message };
    } else {
      this.banner = { kind: "error", text: String(err) };
    }
    this.render();
  }

  private ok(text: string): void {
    this.banner = { kind: "ok", text };
    this.render();
  }

  async doLogin(userId: string, secret: string): Promise<void> {
    try {
      const result = await this.api.login(userId, secret);
      this.api.setToken(result.token);
      this.session = {
        userId: result.user_id,
        activeRole: result.active_role,
        roles: result.roles,
      };
      this.view = "RoleSelect";
      this.banner = null;
      this.render();
    } catch (err) {
      this.fail(err); // stay on Login
    }
  }

  async doSelectRole(role: string): Promise<void> {
    if (!this.session) return;
    try {
      if (role !== this.session.activeRole) {
        await this.api.switchRole(role);
      }
      this.session.activeRole = role;
      this.fetched = {}; // nothing crosses a role switch
      this.navigate(ROLE_HOME[role]);
    } catch (err) {
      this.fail(err);
    }
  }

  async doLogout(): Promise<void> {
    try {
      await this.api.logout();
    } catch {
      // token already dead server-side; drop it locally regardless
    }
    this.api.setToken(null);
    this.session = null;
    this.fetched = {};
    this.insertDraft = {};
    this.view = "Login";
    this.banner = null;
    this.render();
  }

  async doInsert(fields: Record<string, string>): Promise<void> {
    this.insertDraft = { ...fields };
    const problems = validateInsert(fields);
    if (problems.length) {
      this.banner = { kind: "error", text: problems[0] };
      this.render();
      return;
    }
    try {
      const result = await this.api.insertStudent({
        user_id: fields.user_id,
        name: fields.name,
        program: fields.program,
        year: parseInt(fields.year, 10),
        contact: fields.contact,
      });
      this.insertDraft = {};
      this.ok(`Inserted ${result.user_id} (version ${result.version})`);
    } catch (err) {
      this.fail(err); // draft preserved so the form keeps its values
    }
  }

  async doRetrieve(userId: string): Promise<void> {
    try {
      this.fetched.record = await this.api.retrieveStudent(userId);
      this.banner = null;
      this.render();
    } catch (err) {
      delete this.fetched.record;
      this.fail(err);
    }
  }

  async doSubmitAssignment(course: string, text: string): Promise<void> {
    if (!text) {
      this.banner = { kind: "error", text: "assignment text must not be empty" };
      this.render();
      return;
    }
    try {
      const result = await this.api.submitAssignment(course, new TextEncoder().encode(text));
      this.ok(`Submitted ${result.assignment_id}`);
    } catch (err) {
      this.fail(err);
    }
  }

  async doListSubmissions(course: string): Promise<void> {
    try {
      this.fetched.submissions = (await this.api.listSubmissions(course)).submissions;
      this.banner = null;
      this.render();
    } catch (err) {
      delete this.fetched.submissions;
      this.fail(err);
    }
  }

  async doRefreshHealth(): Promise<void> {
    try {
      this.fetched.health = await this.api.health();
      this.render();
    } catch (err) {
      this.fail(err);
    }
  }

  async doNodeStatus(nodeId: string, status: "Up" | "Down"): Promise<void> {
    try {
      const result = await this.api.setNodeStatus(nodeId, status);
      this.ok(`${result.node_id} is now ${result.status}`);
    } catch (err) {
      this.fail(err);
    }
  }

  async doAdvance(ticks: number): Promise<void> {
    try {
      const result = await this.api.advanceClock(ticks);
      this.ok(`Clock at tick ${result.tick}`);
    } catch (err) {
      this.fail(err);
    }
  }

  async doRereplicate(): Promise<void> {
    try {
      const result = await this.api.rereplicate();
      this.ok(`Repaired ${result.repaired}, trimmed ${result.trimmed}, degraded ${result.degraded.length}`);
    } catch (err) {
      this.fail(err);
    }
  }

  async doBill(fromTick: number, toTick: number): Promise<void> {
    try {
      this.fetched.bill = await this.api.bill(fromTick, toTick);
      this.banner = null;
      this.render();
    } catch (err) {
      delete this.fetched.bill;
      this.fail(err);
    }
  }

  // --- rendering -----------------------------------------------------------

  render(): void {
    clear(this.root);
    this.root.append(this.renderHeader());
    if (this.banner) {
      this.root.append(
        el("div", { class: `banner ${this.banner.kind}`, "data-testid": "banner" }, [
          this.banner.text,
        ]),
      );
    }
    const body = el("main", { "data-view": this.view });
    switch (this.view) {
      case "Login":
        body.append(this.renderLogin());
        break;
      case "RoleSelect":
        body.append(this.renderRoleSelect());
        break;
      case "StudentInsert":
        body.append(this.renderInsert());
        break;
      case "StudentRetrieve":
        body.append(this.renderRetrieve());
        break;
      case "Assignments":
        body.append(this.renderAssignments());
        break;
      case "AdminPanel":
        body.append(this.renderAdmin());
        break;
    }
    this.root.append(body);
  }

  private renderHeader(): HTMLElement {
    const header = el("header", {}, [el("h1", {}, ["University Cloud"])]);
    if (this.session) {
      const nav = el("nav", {});
      for (const view of VIEWS_BY_ROLE[this.session.activeRole] ?? []) {
        const btn = el("button", { "data-nav": view }, [viewTitle(view)]);
        btn.addEventListener("click", () => this.navigate(view));
        nav.append(btn);
      }
      const roles = el("button", { "data-nav": "RoleSelect" }, ["Switch role"]);
      roles.addEventListener("click", () => this.navigate("RoleSelect"));
      nav.append(roles);
      const out = el("button", { "data-testid": "logout" }, ["Log out"]);
      out.addEventListener("click", () => void this.doLogout());
      nav.append(out);
      header.append(
        nav,
        el("div", { class: "whoami", "data-testid": "whoami" }, [
          `${this.session.userId} (${this.session.activeRole})`,
        ]),
      );
    }
    return header;
  }

  private renderLogin(): HTMLElement {
    const user = el("input", { name: "user_id", autocomplete: "username" });
    const secret = el("input", { name: "secret", type: "password" });
    const form = el("form", { "data-testid": "login-form" }, [
      labeled("User id", user),
      labeled("Secret", secret),
      el("button", { type: "submit" }, ["Log in"]),
    ]);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.doLogin(user.value.trim(), secret.value);
    });
    return el("section", { class: "card" }, [el("h2", {}, ["Sign in"]), form]);
  }

  private renderRoleSelect(): HTMLElement {
    const section = el("section", { class: "card" }, [el("h2", {}, ["Choose a role"])]);
    for (const role of this.session?.roles ?? []) {
      const btn = el("button", { "data-role": role }, [role]);
      btn.addEventListener("click", () => void this.doSelectRole(role));
      section.append(btn);
    }
    return section;
  }

  private renderInsert(): HTMLElement {
    const draft = this.insertDraft;
    const inputs: Record<string, HTMLInputElement> = {
      user_id: el("input", { name: "user_id", value: draft.user_id ?? "" }),
      name: el("input", { name: "name", value: draft.name ?? "" }),
      program: el("input", { name: "program", value: draft.program ?? "" }),
      year: el("input", { name: "year", type: "number", value: draft.year ?? "1" }),
      contact: el("input", { name: "contact", value: draft.contact ?? "" }),
    };
    const form = el("form", { "data-testid": "insert-form" }, [
      labeled("User id", inputs.user_id),
      labeled("Name", inputs.name),
      labeled("Program", inputs.program),
      labeled("Year", inputs.year),
      labeled("Contact", inputs.contact),
      el("button", { type: "submit" }, ["Insert record"]),
    ]);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.doInsert({
        user_id: inputs.user_id.value.trim(),
        name: inputs.name.value,
        program: inputs.program.value,
        year: inputs.year.value,
        contact: inputs.contact.value,
      });
    });
    return el("section", { class: "card" }, [el("h2", {}, ["Insert student"]), form]);
  }

  private renderRetrieve(): HTMLElement {
    const input = el("input", { name: "lookup_id" });
    const form = el("form", { "data-testid": "retrieve-form" }, [
      labeled("User id", input),
      el("button", { type: "submit" }, ["Retrieve"]),
    ]);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.doRetrieve(input.value.trim());
    });
    const section = el("section", { class: "card" }, [el("h2", {}, ["Retrieve student"]), form]);
    const record = this.fetched.record;
    if (record) {
      section.append(
        el("dl", { class: "record", "data-testid": "record-card" }, [
          el("dt", {}, ["User id"]), el("dd", { "data-field": "user_id" }, [record.user_id]),
          el("dt", {}, ["Name"]), el("dd", { "data-field": "name" }, [record.name]),
          el("dt", {}, ["Program"]), el("dd", { "data-field": "program" }, [record.program]),
          el("dt", {}, ["Year"]), el("dd", { "data-field": "year" }, [String(record.year)]),
          el("dt", {}, ["Contact"]), el("dd", { "data-field": "contact" }, [record.contact]),
          el("dt", {}, ["Version"]), el("dd", { "data-field": "version" }, [String(record.version)]),
        ]),
      );
    }
    return section;
  }

  private renderAssignments(): HTMLElement {
    const section = el("section", { class: "card" }, [el("h2", {}, ["Assignments"])]);
    const role = this.session?.activeRole;
    if (role === "Student") {
      const course = el("input", { name: "course", value: "cs101" });
      const text = el("textarea", { name: "content" });
      const form = el("form", { "data-testid": "submit-form" }, [
        labeled("Course", course),
        labeled("Work", text),
        el("button", { type: "submit" }, ["Submit"]),
      ]);
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void this.doSubmitAssignment(course.value.trim(), text.value);
      });
      section.append(form);
    }
    if (role === "Staff") {
      const course = el("input", { name: "course", value: "cs101" });
      const form = el("form", { "data-testid": "list-form" }, [
        labeled("Course", course),
        el("button", { type: "submit" }, ["List submissions"]),
      ]);
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void this.doListSubmissions(course.value.trim());
      });
      section.append(form);
      const subs = this.fetched.submissions;
      if (subs) {
        const list = el("ul", { "data-testid": "submissions" });
        for (const sub of subs) {
          list.append(
            el("li", {}, [
              `${sub.id} by ${sub.owner} at tick ${sub.submitted_at_tick}` +
                (sub.grade ? ` — grade ${sub.grade}` : ""),
            ]),
          );
        }
        section.append(list);
      }
    }
    return section;
  }

  private renderAdmin(): HTMLElement {
    const section = el("section", { class: "card" }, [el("h2", {}, ["Admin panel"])]);
    const health = this.fetched.health;
    const healthLine = health
      ? `up nodes: ${health.up_nodes}, degraded objects: ${health.degraded_objects}, ` +
        (health.ok ? "healthy" : "DEGRADED")
      : "health not loaded";
    const refresh = el("button", { "data-testid": "refresh-health" }, ["Refresh health"]);
    refresh.addEventListener("click", () => void this.doRefreshHealth());
    section.append(el("p", { "data-testid": "health" }, [healthLine]), refresh);

    const nodeInput = el("input", { name: "node_id", placeholder: "n1" });
    const up = el("button", { "data-testid": "node-up" }, ["Mark Up"]);
    const down = el("button", { "data-testid": "node-down" }, ["Mark Down"]);
    up.addEventListener("click", () => void this.doNodeStatus(nodeInput.value.trim(), "Up"));
    down.addEventListener("click", () => void this.doNodeStatus(nodeInput.value.trim(), "Down"));
    section.append(el("div", { class: "row" }, [labeled("Node", nodeInput), up, down]));

    const ticksInput = el("input", { name: "ticks", type: "number", value: "1" });
    const advance = el("button", { "data-testid": "advance" }, ["Advance clock"]);
    advance.addEventListener("click", () =>
      void this.doAdvance(parseInt(ticksInput.value, 10) || 0),
    );
    const repair = el("button", { "data-testid": "rereplicate" }, ["Re-replicate"]);
    repair.addEventListener("click", () => void this.doRereplicate());
    section.append(el("div", { class: "row" }, [labeled("Ticks", ticksInput), advance, repair]));

    const fromInput = el("input", { name: "bill_from", type: "number", value: "0" });
    const toInput = el("input", { name: "bill_to", type: "number", value: "10" });
    const billBtn = el("button", { "data-testid": "bill" }, ["Compute bill"]);
    billBtn.addEventListener("click", () =>
      void this.doBill(parseInt(fromInput.value, 10) || 0, parseInt(toInput.value, 10) || 0),
    );
    section.append(
      el("div", { class: "row" }, [
        labeled("From tick", fromInput),
        labeled("To tick", toInput),
        billBtn,
      ]),
    );
    const bill = this.fetched.bill;
    if (bill) {
      section.append(
        el("p", { "data-testid": "bill-total" }, [
          `Total over [${bill.from_tick}, ${bill.to_tick}): ` +
            `${bill.total_micro_credits} micro-credits ` +
            `(rate ${bill.rate_micro_per_mib_tick}/MiB-tick)`,
        ]),
      );
    }
    return section;
  }
}

export function validateInsert(fields: Record<string, string>): string[] {
  const problems: string[] = [];
  if (!/^[A-Za-z0-9_-]{3,32}$/.test(fields.user_id ?? "")) {
    problems.push("user id must be 3-32 characters of letters, digits, '_' or '-'");
  }
  if (!fields.name || fields.name.length < 1) {
    problems.push("name must not be empty");
  }
  const year = parseInt(fields.year ?? "", 10);
  if (!Number.isFinite(year) || year < 1) {
    problems.push("year must be an integer >= 1");
  }
  return problems;
}

function viewTitle(view: View): string {
  switch (view) {
    case "StudentInsert":
      return "Insert";
    case "StudentRetrieve":
      return "Retrieve";
    case "Assignments":
      return "Assignments";
    case "AdminPanel":
      return "Admin";
    default:
      return view;
  }
}
