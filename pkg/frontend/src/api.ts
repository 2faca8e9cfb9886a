/** Typed client for the tumorscope REST API.
 *
 * All clinical values (label, confidence, detections, overlay) come straight
 * from the service; nothing is recomputed client-side.
 */

export interface LoginResponse {
  token: string;
  expires_at: number;
}

export interface UploadResponse {
  upload_id: string;
  patient_id: string;
  status: string;
  created_at: number;
}

export interface Detection {
  box: number[];
  class_label: string;
  score: number;
}

export interface DiagnosisResult {
  upload_id: string;
  patient_id: string;
  label: string;
  confidence: number;
  overlay_ref: string;
  detections: Detection[];
  created_at: number;
}

export interface ApiError {
  code: string;
  message: string;
  field?: string;
}

export type ResultPoll =
  | { state: "processing" }
  | { state: "done"; result: DiagnosisResult }
  | { state: "failed"; error: ApiError };

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiError,
  ) {
    super(body.message);
    this.name = "ApiRequestError";
  }
}

type FetchLike = typeof fetch;

async function errorBody(resp: Response): Promise<ApiError> {
  try {
    const body = (await resp.json()) as ApiError;
    if (body && typeof body.code === "string") return body;
  } catch {
    /* non-JSON error body */
  }
  return { code: `http_${resp.status}`, message: resp.statusText || "request failed" };
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(): Record<string, string> {
    return this.token ? { Authorization: `Bearer ${this.token}` } : {};
  }

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const resp = await this.fetchImpl(this.url("/api/login"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ username, password }),
    });
    if (!resp.ok) throw new ApiRequestError(resp.status, await errorBody(resp));
    return (await resp.json()) as LoginResponse;
  }

  async uploadScan(file: Blob, filename: string, patientId: string): Promise<UploadResponse> {
    const form = new FormData();
    form.append("file", file, filename);
    form.append("patient_id", patientId);
    const resp = await this.fetchImpl(this.url("/api/scans"), {
      method: "POST",
      headers: this.headers(),
      body: form,
    });
    if (resp.status !== 202) throw new ApiRequestError(resp.status, await errorBody(resp));
    return (await resp.json()) as UploadResponse;
  }

  /** One poll of an upload's result: processing (202), done (200), failed (500). */
  async getResult(uploadId: string): Promise<ResultPoll> {
    const resp = await this.fetchImpl(
      this.url(`/api/scans/${encodeURIComponent(uploadId)}/result`),
      { headers: this.headers() },
    );
    if (resp.status === 202) return { state: "processing" };
    if (resp.status === 200) return { state: "done", result: (await resp.json()) as DiagnosisResult };
    const body = await errorBody(resp);
    if (resp.status === 500 && body.code === "processing_failed") {
      return { state: "failed", error: body };
    }
    throw new ApiRequestError(resp.status, body);
  }

  async patientResults(patientId: string): Promise<DiagnosisResult[]> {
    const resp = await this.fetchImpl(
      this.url(`/api/patients/${encodeURIComponent(patientId)}/results`),
      { headers: this.headers() },
    );
    if (!resp.ok) throw new ApiRequestError(resp.status, await errorBody(resp));
    return (await resp.json()) as DiagnosisResult[];
  }

  /** Absolute URL of an artifact reference such as "/api/artifacts/x.png". */
  artifactUrl(ref: string): string {
    return this.url(ref);
  }

  async fetchArtifact(ref: string): Promise<Blob> {
    const resp = await this.fetchImpl(this.url(ref), { headers: this.headers() });
    if (!resp.ok) throw new ApiRequestError(resp.status, await errorBody(resp));
    return await resp.blob();
  }
}

/** Poll an upload until it leaves "processing": 1 s cadence backing off to 5 s. */
export async function pollResult(
  client: ApiClient,
  uploadId: string,
  opts: {
    timeoutMs?: number;
    sleep?: (ms: number) => Promise<void>;
    onPoll?: (attempt: number) => void;
  } = {},
): Promise<ResultPoll> {
  const timeoutMs = opts.timeoutMs ?? 120_000;
  const sleep = opts.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
  const start = Date.now();
  let attempt = 0;
  for (;;) {
    opts.onPoll?.(attempt);
    const poll = await client.getResult(uploadId);
    if (poll.state !== "processing") return poll;
    if (Date.now() - start > timeoutMs) {
      return { state: "failed", error: { code: "timeout", message: "polling timed out" } };
    }
    await sleep(Math.min(1000 + attempt * 1000, 5000));
    attempt += 1;
  }
}
