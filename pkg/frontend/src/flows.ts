/**
 * Login and enrollment flows, expressed as pure async functions from
 * (client, inputs) to a UiState the view layer renders. Every service
 * error code maps to its own view id, so failures are never swallowed
 * or collapsed.
 *
 * The plaintext code is only ever forwarded to /api/verify immediately
 * after /api/recognize returns it; it is never stored here.
 */

import {
  ConnectionError,
  FaceAuthClient,
  ServiceError,
  ServiceErrorCode,
} from "./api.js";
import { CaptureFrame } from "./capture.js";

export const MIN_ENROLL_FRAMES = 3;

export interface ErrorView {
  view: string;
  message: string;
  canRetry: boolean;
}

/** One distinct rendered state per service error code. */
export const ERROR_VIEWS: Record<ServiceErrorCode, ErrorView> = {
  malformed_uri: {
    view: "error-bad-capture",
    message: "The captured frame could not be read. Capture again.",
    canRetry: true,
  },
  unsupported_format: {
    view: "error-unsupported-format",
    message: "The capture format is not supported (use PNG or JPEG).",
    canRetry: true,
  },
  corrupt_payload: {
    view: "error-corrupt-image",
    message: "The image payload arrived corrupted. Capture again.",
    canRetry: true,
  },
  image_too_small: {
    view: "error-image-too-small",
    message: "The capture is too small for face detection.",
    canRetry: true,
  },
  already_enrolled: {
    view: "error-already-enrolled",
    message: "This email is already enrolled.",
    canRetry: false,
  },
  too_few_images: {
    view: "error-too-few-captures",
    message: `Enrollment needs at least ${MIN_ENROLL_FRAMES} captures.`,
    canRetry: true,
  },
  no_face_found: {
    view: "error-no-face",
    message: "No face was found in the capture.",
    canRetry: true,
  },
  multiple_faces: {
    view: "error-multiple-faces",
    message: "More than one face was found; only one person may be in frame.",
    canRetry: true,
  },
  no_model: {
    view: "error-service-not-ready",
    message: "The recognizer has not been trained yet. Try again later.",
    canRetry: false,
  },
  not_recognized: {
    view: "error-not-recognized",
    message: "Face not recognized. Try again.",
    canRetry: true,
  },
  single_class: {
    view: "error-need-more-users",
    message: "The service needs at least two enrolled users before training.",
    canRetry: false,
  },
  storage_authentication_failed: {
    view: "error-storage-integrity",
    message: "Stored credentials failed an integrity check. Contact support.",
    canRetry: false,
  },
  internal: {
    view: "error-internal",
    message: "The service reported an internal error.",
    canRetry: true,
  },
};

export type UiState =
  | { kind: "authenticated"; email: string }
  | { kind: "login-failed"; email: string }
  | { kind: "enrolled"; email: string; classLabel: string; oneTimeCode: string }
  | {
      kind: "error";
      view: string;
      message: string;
      canRetry: boolean;
      code: ServiceErrorCode;
      failedIndex?: number;
    }
  | { kind: "connection-error"; message: string }
  | { kind: "validation-error"; message: string };

function stateForError(err: unknown): UiState {
  if (err instanceof ServiceError) {
    const mapped = ERROR_VIEWS[err.code] ?? ERROR_VIEWS.internal;
    return {
      kind: "error",
      view: mapped.view,
      message: mapped.message,
      canRetry: mapped.canRetry,
      code: err.code,
      failedIndex: err.index,
    };
  }
  if (err instanceof ConnectionError) {
    return { kind: "connection-error", message: err.message };
  }
  throw err;
}

/**
 * Face login: recognize the captured frame, then verify the predicted
 * code for the remembered email. The predicted code travels only into
 * the verify call.
 */
export async function loginFlow(
  client: FaceAuthClient,
  email: string,
  frame: CaptureFrame,
): Promise<UiState> {
  if (!email) {
    return { kind: "validation-error", message: "Enter your email before logging in." };
  }
  try {
    const { predicted_code } = await client.recognize(frame.dataUri);
    const { authenticated } = await client.verify(email, predicted_code);
    return authenticated ? { kind: "authenticated", email } : { kind: "login-failed", email };
  } catch (err) {
    return stateForError(err);
  }
}

/**
 * Enrollment: submit the captured frames; on success the one-time code
 * is surfaced exactly once for the user to store.
 */
export async function enrollFlow(
  client: FaceAuthClient,
  email: string,
  frames: CaptureFrame[],
): Promise<UiState> {
  if (!email) {
    return { kind: "validation-error", message: "Enter your email before enrolling." };
  }
  if (frames.length < MIN_ENROLL_FRAMES) {
    return {
      kind: "validation-error",
      message: `Capture at least ${MIN_ENROLL_FRAMES} frames (have ${frames.length}).`,
    };
  }
  try {
    const result = await client.enroll(
      email,
      frames.map((frame) => frame.dataUri),
    );
    return {
      kind: "enrolled",
      email,
      classLabel: result.class_label,
      oneTimeCode: result.code,
    };
  } catch (err) {
    return stateForError(err);
  }
}
