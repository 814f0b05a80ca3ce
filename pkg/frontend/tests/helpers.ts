import { vi } from "vitest";

export const FIXTURE_ENTRY = {
  standard_forms: ["không"],
  definition: "phủ định: không",
  examples: ["ko bik → không biết"],
  source: "seed",
};

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Replace global fetch with a stub returning the given responses in order. */
export function stubFetch(...responses: Response[]) {
  const mock = vi.fn();
  for (const response of responses) {
    mock.mockResolvedValueOnce(response);
  }
  vi.stubGlobal("fetch", mock);
  return mock;
}

export function flush(): Promise<void> {
  // let queued promise callbacks (fetch -> json -> render) run
  return new Promise((resolve) => setTimeout(resolve, 0));
}
