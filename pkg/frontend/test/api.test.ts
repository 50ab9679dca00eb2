import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, MutationInFlight } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body?: unknown;
}

function fakeFetch(responses: Array<{ status?: number; body: unknown }>) {
  const calls: Recorded[] = [];
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    const next = responses.shift() ?? { status: 200, body: {} };
    calls.push({
      url: input,
      method: init?.method ?? "GET",
      body: typeof init?.body === "string" ? JSON.parse(init.body) : init?.body,
    });
    return new Response(JSON.stringify(next.body), {
      status: next.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("api client", () => {
  it("creates sessions with the scenario payload", async () => {
    const { impl, calls } = fakeFetch([{ body: { sessionId: "s1" } }]);
    const client = new ApiClient("http://svc", impl);
    const view = await client.createSession("my office");
    expect(view.sessionId).toBe("s1");
    expect(calls[0]).toMatchObject({
      url: "http://svc/sessions",
      method: "POST",
      body: { scenarioContext: "my office" },
    });
  });

  it("uploads identify images as multipart form data", async () => {
    const { impl, calls } = fakeFetch([{ body: { enrichedMarks: [] } }]);
    const client = new ApiClient("http://svc", impl);
    await client.identify("s1", new Blob([new Uint8Array([1])]), new Blob([new Uint8Array([2])]));
    expect(calls[0].url).toBe("http://svc/sessions/s1/identify");
    const form = calls[0].body as FormData;
    expect(form).toBeInstanceOf(FormData);
    expect([...form.keys()].sort()).toEqual(["numbered", "raw"]);
  });

  it("patches a single policy field", async () => {
    const { impl, calls } = fakeFetch([{ body: { editType: "rename_resource" } }]);
    const client = new ApiClient("http://svc", impl);
    await client.patchPolicy("s1", "policy1", "resource", "Entrance Camera");
    expect(calls[0]).toMatchObject({
      url: "http://svc/sessions/s1/policies/policy1",
      method: "PATCH",
      body: { field: "resource", value: "Entrance Camera" },
    });
  });

  it("raises ApiError with the service detail on failure", async () => {
    const { impl } = fakeFetch([{ status: 409, body: { detail: "session busy: s1" } }]);
    const client = new ApiClient("http://svc", impl);
    await expect(client.setStage("s1", "test")).rejects.toThrowError(ApiError);
    const { impl: impl2 } = fakeFetch([{ status: 409, body: { detail: "session busy: s1" } }]);
    const client2 = new ApiClient("http://svc", impl2);
    try {
      await client2.setStage("s1", "test");
    } catch (error) {
      expect((error as ApiError).status).toBe(409);
      expect((error as ApiError).detail).toBe("session busy: s1");
    }
  });

  it("allows only one mutating request at a time", async () => {
    let resolveFirst: (r: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      resolveFirst = resolve;
    });
    const impl = async (_input: string, init?: RequestInit): Promise<Response> => {
      if (init?.method === "PUT") return gate;
      return new Response("{}", { status: 200 });
    };
    const client = new ApiClient("http://svc", impl);
    const first = client.putSketch("s1", []);
    await expect(client.clarify("s1", "risk1", "hello")).rejects.toThrowError(MutationInFlight);
    resolveFirst(new Response("{}", { status: 200 }));
    await first;
    // sequential mutation after completion is fine
    await client.dismissInsight("s1", "risk1");
  });

  it("reads do not take the mutation slot", async () => {
    const { impl } = fakeFetch([{ body: {} }, { body: {} }]);
    const client = new ApiClient("http://svc", impl);
    await Promise.all([client.getSession("s1"), client.getSketch("s1")]);
  });
});
