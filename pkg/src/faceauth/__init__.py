"""Face-recognition authentication stack.

Pipeline: cascade face detection -> 160x160 crop -> 512-d embedding ->
one-vs-rest linear SVM identification, wrapped in an enrollment/login
web service with encrypted per-user secret codes.
"""

from faceauth.errors import FaceAuthError

__all__ = ["FaceAuthError"]
__version__ = "0.1.0"
