/** Typed client for the recoloring service. */

export interface PlanTarget {
  id: string;
  bc: number;
  distance: number;
  weight: number;
  thumbnail?: string;
}

export interface Plan {
  source_id: string;
  target_distribution: Record<string, number>;
  candidates: { size: number; omega: number; fallback_used: boolean };
  targets: PlanTarget[];
  histogram_digest: string;
  params: Record<string, number>;
  feature_signature: string;
}

export interface TransformResponse {
  image_b64: string;
  plan: Plan;
  timings_ms: Record<string, number>;
}

export interface TransformRequest {
  image_b64: string;
  emotion: Record<string, number>;
  k?: number;
  strength?: number;
  passes?: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function post<T>(fetchFn: FetchLike, url: string, body: unknown): Promise<T> {
  const response = await fetchFn(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) {
    let message = `HTTP ${response.status}`;
    let field: string | undefined;
    try {
      const doc = await response.json();
      message = doc.error ?? message;
      field = doc.field;
    } catch {
      // non-JSON error body; keep the status message
    }
    throw new ApiError(response.status, message, field);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  preview(request: TransformRequest): Promise<{ plan: Plan }> {
    return post(this.fetchFn, `${this.baseUrl}/v1/preview`, request);
  }

  transform(request: TransformRequest): Promise<TransformResponse> {
    return post(this.fetchFn, `${this.baseUrl}/v1/transform`, request);
  }

  async stats(): Promise<{ records: number; digest: string }> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/database/stats`);
    if (!response.ok) throw new ApiError(response.status, `HTTP ${response.status}`);
    return response.json();
  }
}
