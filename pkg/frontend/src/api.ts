import type { ApiErrorBody, SchemaResponse, WhatifRequestBody, WhatifResponseBody } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = (await response.json()) as ApiErrorBody;
    return new ApiError(body.code ?? "io", body.message ?? response.statusText, response.status);
  } catch {
    return new ApiError("io", response.statusText || `HTTP ${response.status}`, response.status);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async schema(): Promise<SchemaResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/schema`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as SchemaResponse;
  }

  async whatif(body: WhatifRequestBody): Promise<WhatifResponseBody> {
    const response = await this.fetchFn(`${this.baseUrl}/whatif`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as WhatifResponseBody;
  }
}
