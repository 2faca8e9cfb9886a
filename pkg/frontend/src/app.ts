/** Hash-routed single-page app wiring the API client, session, and views.
 *
 * Routes: #/login, #/upload, #/result/<upload_id>, #/patient/<patient_id>.
 * Browser-only; the testable logic lives in api.ts / session.ts / views.ts.
 */
import { ApiClient, ApiRequestError, pollResult } from "./api.js";
import { guardRoute, SessionManager } from "./session.js";
import {
  renderBanner,
  renderFailed,
  renderHistory,
  renderLogin,
  renderResult,
  renderSpinner,
  renderUpload,
} from "./views.js";

export const MAX_UPLOAD_BYTES = 16 * 1024 * 1024;
const ALLOWED_EXTENSIONS = [".png", ".jpg", ".jpeg"];

export function validateUploadForm(
  file: { name: string; size: number } | null,
  patientId: string,
): { ok: true } | { ok: false; field: string; message: string } {
  if (!patientId.trim()) {
    return { ok: false, field: "patient_id", message: "enter a patient ID" };
  }
  if (!file) {
    return { ok: false, field: "file", message: "choose a scan image" };
  }
  const name = file.name.toLowerCase();
  if (!ALLOWED_EXTENSIONS.some((ext) => name.endsWith(ext))) {
    return { ok: false, field: "file", message: "only PNG or JPEG scans are accepted" };
  }
  if (file.size > MAX_UPLOAD_BYTES) {
    return { ok: false, field: "file", message: "file exceeds the 16 MiB limit" };
  }
  return { ok: true };
}

export class App {
  private readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly sessions: SessionManager;
  private uploadedObjectUrl: string | null = null;

  constructor(root: HTMLElement, client: ApiClient, sessions: SessionManager) {
    this.root = root;
    this.client = client;
    this.sessions = sessions;
  }

  start(): void {
    window.addEventListener("hashchange", () => void this.route());
    if (!window.location.hash) window.location.hash = "#/upload";
    void this.route();
  }

  private async route(): Promise<void> {
    const hash = window.location.hash || "#/upload";
    const redirect = guardRoute(this.sessions, hash);
    if (redirect) {
      window.location.hash = redirect;
      return;
    }
    const session = this.sessions.current();
    this.client.setToken(session ? session.token : null);

    if (hash.startsWith("#/login")) return this.showLogin();
    if (hash.startsWith("#/result/")) {
      return this.showResult(decodeURIComponent(hash.slice("#/result/".length)));
    }
    if (hash.startsWith("#/patient/")) {
      return this.showHistory(decodeURIComponent(hash.slice("#/patient/".length)));
    }
    if (hash.startsWith("#/history")) return this.showHistoryPrompt();
    return this.showUpload();
  }

  private loginNext(): string {
    const query = window.location.hash.split("?")[1] ?? "";
    const next = new URLSearchParams(query).get("next");
    return next && next.startsWith("#/") ? next : "#/upload";
  }

  private showLogin(error?: string, username?: string): void {
    this.root.innerHTML = renderLogin({ error, username });
    const form = this.root.querySelector<HTMLFormElement>("#login-form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(form);
      void this.doLogin(String(data.get("username")), String(data.get("password")));
    });
  }

  private async doLogin(username: string, password: string): Promise<void> {
    try {
      const resp = await this.client.login(username, password);
      this.sessions.save({ token: resp.token, username, expiry: resp.expires_at });
      this.client.setToken(resp.token);
      window.location.hash = this.loginNext();
    } catch (err) {
      if (err instanceof ApiRequestError && err.status === 401) {
        // keep the username so the clinician only retypes the password
        this.showLogin("invalid credentials", username);
      } else {
        this.root.insertAdjacentHTML("afterbegin", renderBanner("network failure — check the service"));
        this.root.querySelector("#retry")?.addEventListener("click", () => void this.route());
      }
    }
  }

  private showUpload(error?: { field: string; message: string }): void {
    this.root.innerHTML = renderUpload(error ? { error: error.message, field: error.field } : {});
    const form = this.root.querySelector<HTMLFormElement>("#upload-form")!;
    const submit = this.root.querySelector<HTMLButtonElement>("#upload-submit")!;
    const fileInput = form.elements.namedItem("file") as HTMLInputElement;
    const patientInput = form.elements.namedItem("patient_id") as HTMLInputElement;

    const refresh = () => {
      const file = fileInput.files?.[0] ?? null;
      submit.disabled = !validateUploadForm(file, patientInput.value).ok;
    };
    fileInput.addEventListener("change", refresh);
    patientInput.addEventListener("input", refresh);

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const file = fileInput.files?.[0] ?? null;
      const check = validateUploadForm(file, patientInput.value);
      if (!check.ok) {
        this.showUpload(check);
        return;
      }
      void this.doUpload(file!, patientInput.value.trim());
    });
  }

  private async doUpload(file: File, patientId: string): Promise<void> {
    const progress = this.root.querySelector<HTMLProgressElement>("#upload-progress");
    if (progress) {
      progress.hidden = false;
      progress.value = 10;
    }
    try {
      const resp = await this.client.uploadScan(file, file.name, patientId);
      if (progress) progress.value = 100;
      if (this.uploadedObjectUrl) URL.revokeObjectURL(this.uploadedObjectUrl);
      this.uploadedObjectUrl = URL.createObjectURL(file);
      window.location.hash = `#/result/${encodeURIComponent(resp.upload_id)}`;
    } catch (err) {
      if (err instanceof ApiRequestError && (err.status === 400 || err.status === 413)) {
        this.showUpload({ field: err.body.field ?? "file", message: err.body.message });
      } else {
        this.root.insertAdjacentHTML("afterbegin", renderBanner("upload failed — service unreachable"));
        this.root.querySelector("#retry")?.addEventListener("click", () => void this.route());
      }
    }
  }

  private async showResult(uploadId: string): Promise<void> {
    this.root.innerHTML = renderSpinner(uploadId, 0);
    const poll = await pollResult(this.client, uploadId, {
      onPoll: (attempt) => {
        if (window.location.hash === `#/result/${encodeURIComponent(uploadId)}`) {
          this.root.innerHTML = renderSpinner(uploadId, attempt);
        }
      },
    });
    if (poll.state === "failed") {
      this.root.innerHTML = renderFailed(uploadId, poll.error.message);
      return;
    }
    if (poll.state !== "done") return;
    const overlayUrl = this.client.artifactUrl(poll.result.overlay_ref);
    // for no_tumor results the overlay equals the original; fall back to it
    const originalUrl = this.uploadedObjectUrl ?? overlayUrl;
    this.root.innerHTML = renderResult(poll.result, originalUrl, overlayUrl);
  }

  private async showHistory(patientId: string): Promise<void> {
    try {
      const results = await this.client.patientResults(patientId);
      this.root.innerHTML = renderHistory(patientId, results);
    } catch {
      this.root.insertAdjacentHTML("afterbegin", renderBanner("could not load history"));
      this.root.querySelector("#retry")?.addEventListener("click", () => void this.route());
    }
  }

  private showHistoryPrompt(): void {
    this.root.innerHTML = `
<section class="history-prompt">
  <h1>Patient history</h1>
  <form id="history-form">
    <label>Patient ID <input name="patient_id" required></label>
    <button type="submit">Look up</button>
  </form>
</section>`.trim();
    const form = this.root.querySelector<HTMLFormElement>("#history-form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const pid = String(new FormData(form).get("patient_id")).trim();
      if (pid) window.location.hash = `#/patient/${encodeURIComponent(pid)}`;
    });
  }
}

export function bootstrap(): void {
  const base =
    (document.querySelector('meta[name="api-base"]') as HTMLMetaElement | null)?.content ??
    window.location.origin;
  const client = new ApiClient(base);
  const sessions = new SessionManager(window.sessionStorage);
  new App(document.getElementById("app")!, client, sessions).start();
}
