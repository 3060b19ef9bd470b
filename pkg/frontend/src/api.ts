/**
 * Typed client for the faceauth authentication service.
 *
 * Endpoints: POST /api/enroll, /api/recognize, /api/verify, /api/retrain
 * and GET /api/health. Service failures arrive as
 * `{error: <code>, detail: <message>}` bodies and are surfaced as
 * ServiceError; transport failures become ConnectionError.
 */

/** Wire error codes the service can return (mirrors the server list). */
export const SERVICE_ERROR_CODES = [
  "malformed_uri",
  "unsupported_format",
  "corrupt_payload",
  "image_too_small",
  "already_enrolled",
  "too_few_images",
  "no_face_found",
  "multiple_faces",
  "no_model",
  "not_recognized",
  "single_class",
  "storage_authentication_failed",
  "internal",
] as const;

export type ServiceErrorCode = (typeof SERVICE_ERROR_CODES)[number];

export interface EnrollResponse {
  class_label: string;
  /** The one-time plaintext code; shown to the user once, never stored here. */
  code: string;
}

export interface RecognizeResponse {
  predicted_code: string;
}

export interface VerifyResponse {
  authenticated: boolean;
}

export interface RetrainResponse {
  classes: string[];
  training_accuracy: number;
}

export interface HealthResponse {
  status: string;
  model_loaded: boolean;
  enrolled_users: number;
  retrain_pending: boolean;
  error_codes: string[];
}

export class ServiceError extends Error {
  constructor(
    public readonly code: ServiceErrorCode,
    public readonly detail: string,
    public readonly status: number,
    public readonly index?: number,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ServiceError";
  }
}

export class ConnectionError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ConnectionError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class FaceAuthClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method: body === undefined ? "GET" : "POST",
        headers: { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ConnectionError(
        err instanceof Error ? err.message : "service unreachable",
      );
    }
    if (!response.ok) {
      let code: ServiceErrorCode = "internal";
      let detail = `HTTP ${response.status}`;
      let index: number | undefined;
      try {
        const payload = (await response.json()) as {
          error?: string;
          detail?: string;
          index?: number;
        };
        if (payload.error && (SERVICE_ERROR_CODES as readonly string[]).includes(payload.error)) {
          code = payload.error as ServiceErrorCode;
        }
        if (payload.detail) detail = payload.detail;
        index = payload.index;
      } catch {
        // non-JSON error body: keep the generic code
      }
      throw new ServiceError(code, detail, response.status, index);
    }
    return (await response.json()) as T;
  }

  enroll(email: string, images: string[]): Promise<EnrollResponse> {
    return this.request<EnrollResponse>("/api/enroll", { email, images });
  }

  recognize(image: string): Promise<RecognizeResponse> {
    return this.request<RecognizeResponse>("/api/recognize", { image });
  }

  verify(email: string, code: string): Promise<VerifyResponse> {
    return this.request<VerifyResponse>("/api/verify", { email, code });
  }

  retrain(): Promise<RetrainResponse> {
    return this.request<RetrainResponse>("/api/retrain", {});
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/api/health");
  }
}
