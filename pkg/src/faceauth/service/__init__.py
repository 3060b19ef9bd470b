"""Web authentication service: enrollment, face login, code verification."""

from faceauth.service.core import (
    AlreadyEnrolled,
    AuthService,
    MultipleFaces,
    NoFaceFound,
    NoModel,
    NotRecognized,
    ServiceConfig,
    TooFewImages,
    UnknownEmail,
)
from faceauth.service.crypto import (
    AuthenticationFailed,
    BadKeyLength,
    decrypt_code,
    encrypt_code,
    generate_code,
)
from faceauth.service.http import ERROR_CODES, create_app
from faceauth.service.store import UserRecord, UserStore

__all__ = [
    "AlreadyEnrolled",
    "AuthService",
    "AuthenticationFailed",
    "BadKeyLength",
    "ERROR_CODES",
    "MultipleFaces",
    "NoFaceFound",
    "NoModel",
    "NotRecognized",
    "ServiceConfig",
    "TooFewImages",
    "UnknownEmail",
    "UserRecord",
    "UserStore",
    "create_app",
    "decrypt_code",
    "encrypt_code",
    "generate_code",
]
