"""Shared exception base for the package.

Every module defines its own error classes next to the code that raises
them; they all derive from FaceAuthError so callers (and the HTTP layer)
can catch package failures uniformly.
"""


class FaceAuthError(Exception):
    """Base class for all faceauth errors."""
