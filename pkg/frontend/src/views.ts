/** Pure view functions: every render takes data and returns an HTML string.
 *
 * Keeping views string-valued makes the "UI displays API values verbatim"
 * invariant snapshot-testable without a DOM. Clinical values are only ever
 * HTML-escaped, never transformed (the confidence percentage shown alongside
 * the raw value is plain formatting; the raw API value is always rendered
 * too, in a data attribute and in the detection table).
 */
import type { Detection, DiagnosisResult } from "./api.js";

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function renderLogin(opts: { username?: string; error?: string } = {}): string {
  const error = opts.error
    ? `<p class="error" role="alert">${escapeHtml(opts.error)}</p>`
    : "";
  return `
<section class="login">
  <h1>tumorscope</h1>
  <form id="login-form">
    <label>Username
      <input name="username" autocomplete="username" required
             value="${escapeHtml(opts.username ?? "")}">
    </label>
    <label>Password
      <input name="password" type="password" autocomplete="current-password" required>
    </label>
    ${error}
    <button type="submit">Log in</button>
  </form>
</section>`.trim();
}

export function renderUpload(opts: { error?: string; field?: string } = {}): string {
  const error = opts.error
    ? `<p class="error" role="alert" data-field="${escapeHtml(opts.field ?? "")}">${escapeHtml(opts.error)}</p>`
    : "";
  return `
<section class="upload">
  <h1>Upload MRI scan</h1>
  <form id="upload-form">
    <label>Patient ID
      <input name="patient_id" required placeholder="P-0000">
    </label>
    <label>Scan image (PNG or JPEG, max 16 MiB)
      <input name="file" type="file" accept=".png,.jpg,.jpeg,image/png,image/jpeg" required>
    </label>
    ${error}
    <button type="submit" id="upload-submit" disabled>Upload</button>
    <progress id="upload-progress" max="100" value="0" hidden></progress>
  </form>
  <p><a href="#/history">Patient history</a></p>
</section>`.trim();
}

export function renderSpinner(uploadId: string, attempt: number): string {
  return `
<section class="processing" data-upload-id="${escapeHtml(uploadId)}">
  <div class="spinner" aria-label="processing"></div>
  <p>Analyzing scan&hellip; (poll ${attempt + 1})</p>
</section>`.trim();
}

export function renderDetectionRows(detections: Detection[]): string {
  if (detections.length === 0) {
    return `<tr><td colspan="3" class="empty">no detections</td></tr>`;
  }
  return detections
    .map(
      (d, i) => `<tr>
      <td>${i + 1}</td>
      <td data-raw-score="${d.score}">${escapeHtml(d.class_label)} (${d.score})</td>
      <td>[${d.box.join(", ")}]</td>
    </tr>`,
    )
    .join("\n");
}

/** Result screen: diagnosis badge, confidence, original + overlay, detections.
 * `originalUrl`/`overlayUrl` are resolved by the caller from the API refs. */
export function renderResult(
  result: DiagnosisResult,
  originalUrl: string,
  overlayUrl: string,
): string {
  const badgeClass = result.label === "tumor" ? "badge badge-tumor" : "badge badge-clear";
  const confidencePct = (result.confidence * 100).toFixed(2);
  return `
<section class="result" data-upload-id="${escapeHtml(result.upload_id)}">
  <header>
    <span class="${badgeClass}" data-raw-label="${escapeHtml(result.label)}">${escapeHtml(result.label)}</span>
    <span class="confidence" data-raw-confidence="${result.confidence}">
      confidence ${confidencePct}% (${result.confidence})
    </span>
    <span class="patient">patient <a href="#/patient/${encodeURIComponent(result.patient_id)}">${escapeHtml(result.patient_id)}</a></span>
  </header>
  <div class="images">
    <figure>
      <img src="${escapeHtml(originalUrl)}" alt="uploaded scan">
      <figcaption>original</figcaption>
    </figure>
    <figure>
      <img src="${escapeHtml(overlayUrl)}" alt="segmentation overlay">
      <figcaption>overlay</figcaption>
    </figure>
  </div>
  <table class="detections">
    <thead><tr><th>#</th><th>class (score)</th><th>box</th></tr></thead>
    <tbody>
${renderDetectionRows(result.detections)}
    </tbody>
  </table>
</section>`.trim();
}

export function renderFailed(uploadId: string, reason: string): string {
  return `
<section class="failed" data-upload-id="${escapeHtml(uploadId)}">
  <p class="error" role="alert">Processing failed: ${escapeHtml(reason)}</p>
  <p><a href="#/upload">Upload another scan</a></p>
</section>`.trim();
}

export function renderHistory(patientId: string, results: DiagnosisResult[]): string {
  const rows =
    results.length === 0
      ? `<p class="empty">no prior scans</p>`
      : `<ul class="history">\n${results
          .map(
            (r) => `  <li>
    <a href="#/result/${encodeURIComponent(r.upload_id)}">
      <time data-raw-created-at="${r.created_at}">${new Date(r.created_at * 1000).toISOString()}</time>
      <span data-raw-label="${escapeHtml(r.label)}">${escapeHtml(r.label)}</span>
      <span data-raw-confidence="${r.confidence}">${r.confidence}</span>
    </a>
  </li>`,
          )
          .join("\n")}\n</ul>`;
  return `
<section class="patient-history" data-patient-id="${escapeHtml(patientId)}">
  <h1>Results for ${escapeHtml(patientId)}</h1>
  ${rows}
  <p><a href="#/upload">Back to upload</a></p>
</section>`.trim();
}

export function renderBanner(message: string): string {
  return `<div class="banner" role="alert">${escapeHtml(message)} <button id="retry">Retry</button></div>`;
}
