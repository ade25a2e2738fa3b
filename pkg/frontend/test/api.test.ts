import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { fakeCourse, fakeResponse, jsonResponse } from "./helpers.js";

afterEach(() => {
  vi.restoreAllMocks();
});

describe("ApiClient.recommend", () => {
  it("posts the request body and parses the response", async () => {
    const mock = vi.spyOn(globalThis, "fetch").mockResolvedValue(jsonResponse(200, fakeResponse()));
    const client = new ApiClient("http://svc");
    const response = await client.recommend({ query: "q", levels: "300-400" });

    expect(mock).toHaveBeenCalledWith("http://svc/api/recommend", expect.objectContaining({ method: "POST" }));
    const init = mock.mock.calls[0][1]!;
    expect(JSON.parse(init.body as string)).toEqual({ query: "q", levels: "300-400" });
    expect(response.recommendations).toHaveLength(10);
  });

  it("surfaces the server's detail message on errors", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse(422, { detail: "level filter 500+ leaves no courses to recommend from" }),
    );
    const client = new ApiClient();
    const error = await client.recommend({ query: "q", levels: "500+" }).catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(422);
    expect(error.message).toContain("500+");
  });

  it("copes with non-JSON error bodies", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(new Response("boom", { status: 503 }));
    const error = await new ApiClient().recommend({ query: "q", levels: "all" }).catch((e) => e);
    expect(error.status).toBe(503);
    expect(error.message).toContain("503");
  });
});

describe("ApiClient.course", () => {
  it("URL-encodes course ids with spaces", async () => {
    const mock = vi.spyOn(globalThis, "fetch").mockResolvedValue(jsonResponse(200, fakeCourse("EECS 445")));
    await new ApiClient().course("EECS 445");
    expect(mock).toHaveBeenCalledWith("/api/courses/EECS%20445");
  });

  it("maps 404 to ApiError", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(jsonResponse(404, { detail: "unknown course" }));
    const error = await new ApiClient().course("NOPE 1").catch((e) => e);
    expect(error.status).toBe(404);
  });
});

describe("ApiClient.health", () => {
  it("parses the health payload", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse(200, { status: "ok", catalog_size: 67, dimension: 256, provider_mode: "mock" }),
    );
    const health = await new ApiClient().health();
    expect(health.catalog_size).toBe(67);
    expect(health.provider_mode).toBe("mock");
  });
});
