/** Snapshot tests proving the UI renders API values verbatim: every clinical
 * field from a mock API response must appear, unmodified, in the HTML. */
import { describe, expect, it } from "vitest";

import type { DiagnosisResult } from "../src/api.js";
import {
  renderFailed,
  renderHistory,
  renderLogin,
  renderResult,
  renderSpinner,
  renderUpload,
} from "../src/views.js";

const MOCK_RESULT: DiagnosisResult = {
  upload_id: "u-4242",
  patient_id: "P-17",
  label: "tumor",
  confidence: 0.937512345,
  overlay_ref: "/api/artifacts/u-4242_overlay.png",
  detections: [
    { box: [4, 5, 20, 21], class_label: "tumor", score: 0.937512345 },
    { box: [40, 41, 60, 61], class_label: "tumor", score: 0.612345678 },
  ],
  created_at: 1756166400.25,
};

const NEGATIVE_RESULT: DiagnosisResult = {
  upload_id: "u-4300",
  patient_id: "P-02",
  label: "no_tumor",
  confidence: 0.998877,
  overlay_ref: "/api/artifacts/u-4300_overlay.png",
  detections: [],
  created_at: 1756166500,
};

describe("result view", () => {
  it("renders every API value verbatim (tumor case)", () => {
    const html = renderResult(MOCK_RESULT, "blob:original", "http://svc/api/artifacts/u-4242_overlay.png");
    // raw values straight from the (mock) API response:
    expect(html).toContain('data-raw-label="tumor"');
    expect(html).toContain(`data-raw-confidence="${MOCK_RESULT.confidence}"`);
    expect(html).toContain(`(${MOCK_RESULT.confidence})`);
    expect(html).toContain("P-17");
    expect(html).toContain('data-upload-id="u-4242"');
    for (const det of MOCK_RESULT.detections) {
      expect(html).toContain(`data-raw-score="${det.score}"`);
      expect(html).toContain(`[${det.box.join(", ")}]`);
    }
    expect(html).toContain("http://svc/api/artifacts/u-4242_overlay.png");
    expect(html).toContain("badge-tumor");
    expect(html).toMatchSnapshot();
  });

  it("renders the negative case with a clear badge and no detections", () => {
    const html = renderResult(NEGATIVE_RESULT, "blob:original", "http://svc/api/artifacts/u-4300_overlay.png");
    expect(html).toContain('data-raw-label="no_tumor"');
    expect(html).toContain("badge-clear");
    expect(html).toContain("no detections");
    expect(html).toContain(`data-raw-confidence="${NEGATIVE_RESULT.confidence}"`);
    expect(html).toMatchSnapshot();
  });

  it("shows the confidence percentage to two decimals alongside the raw value", () => {
    const html = renderResult(MOCK_RESULT, "o", "v");
    expect(html).toContain("confidence 93.75%");
  });
});

describe("history view", () => {
  it("renders rows verbatim, and an empty state otherwise", () => {
    const html = renderHistory("P-17", [MOCK_RESULT, NEGATIVE_RESULT]);
    expect(html).toContain("#/result/u-4242");
    expect(html).toContain("#/result/u-4300");
    expect(html).toContain(`data-raw-created-at="${MOCK_RESULT.created_at}"`);
    expect(html).toContain(`data-raw-confidence="${MOCK_RESULT.confidence}"`);
    expect(html).toMatchSnapshot();

    const empty = renderHistory("P-99", []);
    expect(empty).toContain("no prior scans");
  });
});

describe("static views", () => {
  it("login keeps the username after a failed attempt", () => {
    const html = renderLogin({ username: "doc", error: "invalid credentials" });
    expect(html).toContain('value="doc"');
    expect(html).toContain("invalid credentials");
    expect(html).toMatchSnapshot();
  });

  it("upload form starts with the submit disabled", () => {
    const html = renderUpload();
    expect(html).toContain("disabled");
    expect(html).toMatchSnapshot();
  });

  it("spinner and failure views name the upload", () => {
    expect(renderSpinner("u-1", 2)).toContain("poll 3");
    expect(renderFailed("u-1", "model crashed")).toContain("model crashed");
  });

  it("escapes HTML in API-sourced strings without altering the stored raw value", () => {
    const nasty = { ...MOCK_RESULT, patient_id: 'P<script>"x"</script>' };
    const html = renderResult(nasty, "o", "v");
    expect(html).not.toContain("<script>");
    expect(html).toContain("P&lt;script&gt;");
  });
});
