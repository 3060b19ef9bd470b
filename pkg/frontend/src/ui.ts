/**
 * DOM wiring for the login/enrollment page. All logic lives in
 * flows.ts/capture.ts; this file renders UiStates and remembers the
 * email locally so the verify call can name the account.
 */

import { FaceAuthClient } from "./api.js";
import { browserCaptureDeps, CameraCapture, CaptureFrame, NoCamera, PermissionDenied } from "./capture.js";
import { enrollFlow, loginFlow, MIN_ENROLL_FRAMES, UiState } from "./flows.js";

const EMAIL_KEY = "faceauth.email";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function serviceBaseUrl(): string {
  const override = new URLSearchParams(window.location.search).get("service");
  return override ?? (window as { FACEAUTH_URL?: string }).FACEAUTH_URL ?? "http://127.0.0.1:8000";
}

export function render(state: UiState, status: HTMLElement): void {
  status.dataset.view =
    state.kind === "error" ? state.view : state.kind;
  switch (state.kind) {
    case "authenticated":
      status.textContent = `Welcome back, ${state.email}.`;
      break;
    case "login-failed":
      status.textContent = "Authentication failed: the recognized code did not match.";
      break;
    case "enrolled":
      status.textContent =
        `Enrolled as ${state.classLabel}. Your one-time code (store it now): ${state.oneTimeCode}`;
      break;
    case "error": {
      const where = state.failedIndex === undefined ? "" : ` (capture ${state.failedIndex + 1})`;
      status.textContent = `${state.message}${where}${state.canRetry ? " — you can retry." : ""}`;
      break;
    }
    case "connection-error":
      status.textContent = `Cannot reach the service: ${state.message}`;
      break;
    case "validation-error":
      status.textContent = state.message;
      break;
  }
}

export function startApp(): void {
  const video = el<HTMLVideoElement>("camera");
  const status = el<HTMLElement>("status");
  const emailInput = el<HTMLInputElement>("email");
  const captureButton = el<HTMLButtonElement>("capture");
  const enrollButton = el<HTMLButtonElement>("enroll");
  const loginButton = el<HTMLButtonElement>("login");
  const gallery = el<HTMLElement>("gallery");

  emailInput.value = window.localStorage.getItem(EMAIL_KEY) ?? "";
  emailInput.addEventListener("change", () => {
    window.localStorage.setItem(EMAIL_KEY, emailInput.value.trim());
  });

  const client = new FaceAuthClient(serviceBaseUrl());
  const capture = new CameraCapture(browserCaptureDeps(video, document));
  const frames: CaptureFrame[] = [];
  let busy = false;

  capture.start().catch((err) => {
    if (err instanceof PermissionDenied) {
      status.textContent = "Camera permission denied; allow camera access and reload.";
    } else if (err instanceof NoCamera) {
      status.textContent = "No camera found.";
    } else {
      throw err;
    }
  });

  captureButton.addEventListener("click", () => {
    const frame = capture.captureFrame();
    frames.push(frame);
    const thumb = document.createElement("img");
    thumb.src = frame.dataUri;
    thumb.width = 80;
    gallery.appendChild(thumb);
    status.textContent = `${frames.length} capture(s); ${MIN_ENROLL_FRAMES} needed to enroll.`;
  });

  // one in-flight request at a time: buttons disable while pending
  async function run(action: () => Promise<UiState>): Promise<void> {
    if (busy) return;
    busy = true;
    enrollButton.disabled = loginButton.disabled = true;
    try {
      render(await action(), status);
    } finally {
      busy = false;
      enrollButton.disabled = loginButton.disabled = false;
    }
  }

  enrollButton.addEventListener("click", () =>
    run(async () => {
      const state = await enrollFlow(client, emailInput.value.trim(), frames);
      if (state.kind === "enrolled") {
        frames.length = 0;
        gallery.replaceChildren();
      }
      return state;
    }),
  );

  loginButton.addEventListener("click", () =>
    run(async () => {
      const frame = capture.captureFrame();
      return loginFlow(client, emailInput.value.trim(), frame);
    }),
  );
}

if (typeof document !== "undefined" && document.getElementById("camera")) {
  startApp();
}
