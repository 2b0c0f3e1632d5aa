// GatewayClient request shapes, checked against a recording fetch stub.

import { describe, expect, it } from "vitest";
import { GatewayClient, GatewayError, type FetchLike } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function stub(status: number, payload: unknown): { fetch: FetchLike; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetch: fetchFn, calls };
}

describe("GatewayClient", () => {
  it("strips a trailing slash from the base url", async () => {
    const { fetch, calls } = stub(200, { status: "ok" });
    await new GatewayClient("http://x:1/", fetch).status();
    expect(calls[0].url).toBe("http://x:1/status");
  });

  it("posts chat messages with the optional session id", async () => {
    const { fetch, calls } = stub(200, {});
    const client = new GatewayClient("http://x:1", fetch);
    await client.chat("AAAA111111", "hello");
    await client.chat("AAAA111111", "Yes, please", "abc123");
    expect(calls[0]).toEqual({
      url: "http://x:1/chat",
      method: "POST",
      body: { user_id: "AAAA111111", text: "hello" },
    });
    expect(calls[1].body).toEqual({
      user_id: "AAAA111111",
      text: "Yes, please",
      session_id: "abc123",
    });
  });

  it("sends vitals samples flattened into the payload", async () => {
    const { fetch, calls } = stub(200, {});
    await new GatewayClient("http://x:1", fetch).vitals("AAAA111111", {
      heart_rate: 41,
      oxygen: 85,
    });
    expect(calls[0].body).toEqual({ user_id: "AAAA111111", heart_rate: 41, oxygen: 85 });
  });

  it("encodes query parameters on the GET routes", async () => {
    const { fetch, calls } = stub(200, {});
    const client = new GatewayClient("http://x:1", fetch);
    await client.reminders("AAAA 111111");
    await client.report("AAAA111111", "2025-03-01");
    await client.sessionLog("abc/123");
    expect(calls[0].url).toBe("http://x:1/reminders?user_id=AAAA%20111111");
    expect(calls[1].url).toBe("http://x:1/report?user_id=AAAA111111&date=2025-03-01");
    expect(calls[2].url).toBe("http://x:1/sessions/abc%2F123/log");
  });

  it("posts sos triggers with their kind", async () => {
    const { fetch, calls } = stub(200, {});
    await new GatewayClient("http://x:1", fetch).sos("AAAA111111", "hard_start");
    expect(calls[0].body).toEqual({ user_id: "AAAA111111", kind: "hard_start" });
  });

  it("turns the gateway error label into a typed error", async () => {
    const { fetch } = stub(404, { error: "UnknownUser", detail: "ZZZZ999999" });
    const client = new GatewayClient("http://x:1", fetch);
    const failure = await client.status().catch((err) => err);
    expect(failure).toBeInstanceOf(GatewayError);
    expect(failure.status).toBe(404);
    expect(failure.message).toBe("UnknownUser");
  });

  it("falls back to validation detail, then the status code", async () => {
    const withDetail = stub(422, { detail: [{ msg: "bad" }] });
    const detailErr = await new GatewayClient("http://x:1", withDetail.fetch)
      .status()
      .catch((err) => err);
    expect(detailErr.message).toContain("bad");

    const empty: FetchLike = async () => new Response("not json", { status: 500 });
    const plainErr = await new GatewayClient("http://x:1", empty).status().catch((err) => err);
    expect(plainErr.message).toBe("HTTP 500");
  });
});
