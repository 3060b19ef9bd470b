/**
 * Webcam capture: one video element fed by getUserMedia, frames exported
 * as JPEG data URIs through a canvas. Browser objects are injected so
 * the logic runs under test without a DOM.
 */

export interface CaptureFrame {
  dataUri: string;
  capturedAt: number;
  width: number;
  height: number;
}

export class PermissionDenied extends Error {
  constructor() {
    super("camera permission denied");
    this.name = "PermissionDenied";
  }
}

export class NoCamera extends Error {
  constructor() {
    super("no camera available");
    this.name = "NoCamera";
  }
}

/** The slice of browser surface the capturer needs. An HTMLVideoElement
 * satisfies `video` directly. */
export interface CaptureDeps {
  getUserMedia(constraints: MediaStreamConstraints): Promise<MediaStream>;
  video: {
    srcObject: MediaProvider | null;
    videoWidth: number;
    videoHeight: number;
    play(): Promise<void>;
  };
  createCanvas(width: number, height: number): {
    getContext(kind: "2d"): {
      drawImage(source: unknown, dx: number, dy: number): void;
    } | null;
    toDataURL(type: string, quality?: number): string;
  };
  now(): number;
}

export const JPEG_QUALITY = 0.9;

export class CameraCapture {
  private stream: MediaStream | null = null;

  constructor(private readonly deps: CaptureDeps) {}

  /** Ask for the camera and start the preview stream. */
  async start(): Promise<void> {
    try {
      this.stream = await this.deps.getUserMedia({ video: true, audio: false });
    } catch (err) {
      const name = err instanceof Error ? err.name : "";
      if (name === "NotAllowedError" || name === "SecurityError") {
        throw new PermissionDenied();
      }
      throw new NoCamera();
    }
    this.deps.video.srcObject = this.stream;
    await this.deps.video.play();
  }

  /** Export the current video frame at its native resolution. */
  captureFrame(): CaptureFrame {
    if (this.stream === null) {
      throw new NoCamera();
    }
    const width = this.deps.video.videoWidth;
    const height = this.deps.video.videoHeight;
    if (width === 0 || height === 0) {
      throw new NoCamera();
    }
    const canvas = this.deps.createCanvas(width, height);
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new NoCamera();
    }
    ctx.drawImage(this.deps.video, 0, 0);
    return {
      dataUri: canvas.toDataURL("image/jpeg", JPEG_QUALITY),
      capturedAt: this.deps.now(),
      width,
      height,
    };
  }

  stop(): void {
    if (this.stream) {
      for (const track of this.stream.getTracks()) {
        track.stop();
      }
      this.stream = null;
    }
  }
}

/** Default wiring against real browser objects. */
export function browserCaptureDeps(video: HTMLVideoElement, doc: Document): CaptureDeps {
  return {
    getUserMedia: (constraints) => navigator.mediaDevices.getUserMedia(constraints),
    video,
    createCanvas: (width, height) => {
      const canvas = doc.createElement("canvas");
      canvas.width = width;
      canvas.height = height;
      return canvas;
    },
    now: () => Date.now(),
  };
}
