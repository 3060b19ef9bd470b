"""Secret codes and their encryption at rest.

A user's code is 32 random bytes, presented as 64 lowercase hex chars.
Codes are stored only as AES-256-GCM ciphertext with a fresh random
nonce per record; any modification of nonce or ciphertext fails
authentication on decrypt.
"""

from __future__ import annotations

import secrets
from typing import NamedTuple

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from faceauth.errors import FaceAuthError

KEY_BYTES = 32
NONCE_BYTES = 12
CODE_BYTES = 32


class CryptoError(FaceAuthError):
    pass


class BadKeyLength(CryptoError):
    pass


class AuthenticationFailed(CryptoError):
    """Ciphertext or nonce was modified, or the key is wrong."""


class EncryptedCode(NamedTuple):
    nonce: bytes
    ciphertext: bytes


def generate_code() -> str:
    """Fresh secret code from a cryptographically strong source."""
    return secrets.token_bytes(CODE_BYTES).hex()


def _check_key(key: bytes) -> None:
    if len(key) != KEY_BYTES:
        raise BadKeyLength(f"master key must be {KEY_BYTES} bytes, got {len(key)}")


def encrypt_code(code: str, key: bytes) -> EncryptedCode:
    """Authenticated encryption of a code under the master key, with a
    fresh random nonce."""
    _check_key(key)
    nonce = secrets.token_bytes(NONCE_BYTES)
    ciphertext = AESGCM(key).encrypt(nonce, code.encode("utf-8"), None)
    return EncryptedCode(nonce=nonce, ciphertext=ciphertext)


def decrypt_code(encrypted: EncryptedCode, key: bytes) -> str:
    """Decrypt and authenticate a stored code.

    Raises:
        AuthenticationFailed: tampered ciphertext/nonce or wrong key.
    """
    _check_key(key)
    try:
        plain = AESGCM(key).decrypt(encrypted.nonce, encrypted.ciphertext, None)
    except InvalidTag as exc:
        raise AuthenticationFailed("stored code failed authentication") from exc
    return plain.decode("utf-8")
