import { afterEach, describe, expect, it, vi } from "vitest";

import { Api, ApiError } from "../src/api";
import { validateInsert } from "../src/app";

afterEach(() => {
  vi.restoreAllMocks();
});

describe("validateInsert", () => {
  const good = { user_id: "S1001", name: "A", program: "BSc", year: "2", contact: "" };

  it("accepts a well-formed record", () => {
    expect(validateInsert(good)).toEqual([]);
  });

  it("rejects an empty name", () => {
    expect(validateInsert({ ...good, name: "" })).toEqual(["name must not be empty"]);
  });

  it("rejects bad user ids", () => {
    expect(validateInsert({ ...good, user_id: "ab" })).toHaveLength(1);
    expect(validateInsert({ ...good, user_id: "has space" })).toHaveLength(1);
  });

  it("rejects year below one", () => {
    expect(validateInsert({ ...good, year: "0" })).toHaveLength(1);
    expect(validateInsert({ ...good, year: "x" })).toHaveLength(1);
  });
});

describe("Api error mapping", () => {
  it("raises ApiError carrying the wire code and verbatim message", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      new Response(
        JSON.stringify({ code: "DUPLICATE_ID", message: "record S1 already exists" }),
        { status: 409, headers: { "Content-Type": "application/json" } },
      ),
    ));
    const api = new Api("http://example.test");
    const err = await api
      .insertStudent({ user_id: "S1", name: "n", program: "p", year: 1, contact: "" })
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("DUPLICATE_ID");
    expect(err.status).toBe(409);
    expect(err.message).toBe("record S1 already exists");
  });

  it("sends the bearer token once set", async () => {
    const seen: string[] = [];
    vi.stubGlobal("fetch", vi.fn(async (_url: string, init: RequestInit) => {
      seen.push((init.headers as Record<string, string>)["Authorization"] ?? "");
      return new Response(JSON.stringify({ ok: true }), { status: 200 });
    }));
    const api = new Api("http://example.test");
    api.setToken("deadbeef");
    await api.logout();
    expect(seen).toEqual(["Bearer deadbeef"]);
  });
});
