/** Typed client for the three normalization-service endpoints. */

export interface DictEntry {
  standard_forms: string[];
  definition: string;
  examples: string[];
  source: string;
}

export interface LookupResponse {
  word: string;
  found: boolean;
  was_fallback: boolean;
  entries: DictEntry[];
}

export interface TokenRecord {
  source: string;
  prediction: string;
  is_nsw: boolean;
  confidence: number;
}

export interface NormalizeResponse {
  normalized: string;
  tokens: TokenRecord[];
}

export interface HealthResponse {
  status: string;
  dictionary_version: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

declare global {
  interface Window {
    LEXFORGE_API_BASE?: string;
  }
}

/** Service base URL; override by setting window.LEXFORGE_API_BASE before load. */
export function apiBase(): string {
  return window.LEXFORGE_API_BASE ?? "http://127.0.0.1:8000";
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = await response.json();
      if (body && typeof body.error === "string") detail = body.error;
    } catch {
      /* non-JSON error body: keep the status text */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export async function lookupWord(word: string): Promise<LookupResponse> {
  const url = `${apiBase()}/dict_lookup?word=${encodeURIComponent(word)}`;
  return asJson<LookupResponse>(await fetch(url));
}

export async function normalizeText(
  sentence: string,
): Promise<NormalizeResponse> {
  const response = await fetch(`${apiBase()}/normalize_text`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ sentence }),
  });
  return asJson<NormalizeResponse>(response);
}

export async function health(): Promise<HealthResponse> {
  return asJson<HealthResponse>(await fetch(`${apiBase()}/health`));
}
