"""Rate limiting configuration using slowapi.

Scenario runs and kernel builds are CPU heavy and unauthenticated, so the
key is the client address.
"""

from fastapi import Request
from slowapi import Limiter
from slowapi.util import get_remote_address


def client_key(request: Request) -> str:
    """Rate-limit bucket for a request: ``ip:<address>``."""
    return f"ip:{get_remote_address(request)}"


# In-memory storage; a multi-worker deployment needs a shared backend
limiter = Limiter(key_func=client_key)
