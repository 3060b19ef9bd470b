"""HTTP layer over AuthService.

Endpoints (JSON bodies):

    POST /api/enroll     {email, images: [data-uri, ...]}
    POST /api/recognize  {image: data-uri}
    POST /api/verify     {email, code}
    POST /api/retrain    {}
    GET  /api/health

Errors come back as {"error": <code>, "detail": <message>} with the
status codes in _ERROR_MAP. /api/verify answers {"authenticated": false}
for unknown emails and wrong codes alike, so responses cannot be used to
enumerate accounts.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from faceauth import imaging
from faceauth.classifier import SingleClass
from faceauth.detector import ImageTooSmall
from faceauth.errors import FaceAuthError
from faceauth.service import crypto
from faceauth.service.core import (
    AlreadyEnrolled,
    AuthService,
    MultipleFaces,
    NoFaceFound,
    NoModel,
    NotRecognized,
    TooFewImages,
    UnknownEmail,
)

# Exception -> (status, wire code). Order matters: first match wins.
_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (imaging.MalformedUri, 400, "malformed_uri"),
    (imaging.UnsupportedFormat, 400, "unsupported_format"),
    (imaging.CorruptPayload, 400, "corrupt_payload"),
    (ImageTooSmall, 422, "image_too_small"),
    (AlreadyEnrolled, 409, "already_enrolled"),
    (TooFewImages, 400, "too_few_images"),
    (NoFaceFound, 422, "no_face_found"),
    (MultipleFaces, 422, "multiple_faces"),
    (NoModel, 503, "no_model"),
    (NotRecognized, 401, "not_recognized"),
    (SingleClass, 409, "single_class"),
    (crypto.AuthenticationFailed, 500, "storage_authentication_failed"),
]

ERROR_CODES = [code for _, _, code in _ERROR_MAP] + ["internal"]


class EnrollRequest(BaseModel):
    email: str
    images: list[str]


class RecognizeRequest(BaseModel):
    image: str


class VerifyRequest(BaseModel):
    email: str
    code: str


def _error_response(exc: Exception) -> JSONResponse:
    for klass, status, code in _ERROR_MAP:
        if isinstance(exc, klass):
            detail = str(exc)
            index = getattr(exc, "index", None)
            body = {"error": code, "detail": detail}
            if index is not None:
                body["index"] = index
            return JSONResponse(status_code=status, content=body)
    return JSONResponse(status_code=500, content={"error": "internal", "detail": str(exc)})


def create_app(service: AuthService) -> FastAPI:
    app = FastAPI(title="faceauth", version="0.1.0")

    @app.exception_handler(FaceAuthError)
    async def handle_faceauth_error(request: Request, exc: FaceAuthError):
        return _error_response(exc)

    @app.post("/api/enroll")
    def enroll(req: EnrollRequest):
        result = service.enroll(req.email, req.images)
        return {"class_label": result.class_label, "code": result.code}

    @app.post("/api/recognize")
    def recognize(req: RecognizeRequest):
        result = service.recognize(req.image)
        return {"predicted_code": result.predicted_code}

    @app.post("/api/verify")
    def verify(req: VerifyRequest):
        try:
            ok = service.verify(req.email, req.code)
        except UnknownEmail:
            ok = False
        return {"authenticated": ok}

    @app.post("/api/retrain")
    def retrain():
        result = service.retrain()
        return {
            "classes": list(result.classes),
            "training_accuracy": result.training_accuracy,
        }

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "model_loaded": service.model is not None,
            "enrolled_users": len(service.store),
            "retrain_pending": service.store.retrain_pending,
            "error_codes": ERROR_CODES,
        }

    return app
