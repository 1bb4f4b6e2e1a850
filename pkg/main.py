"""HTTP entry point for the Boltzmann solver service.

Sets up the FastAPI application: directory preparation on startup, request
timing, CORS, rate limiting, a fallback handler for solver errors, and the
scenario and kernel-mode routes.
"""

import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import List

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from slowapi import _rate_limit_exceeded_handler
from slowapi.errors import RateLimitExceeded

from config import settings
from errors import SolverError
from logger import get_logger
from routers import kernels, scenarios
from utils.rate_limit import limiter

logger = get_logger(__name__)

VERSION = "1.0.0"


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Create the output and kernel-cache directories, then serve."""
    logger.info("Starting Boltzmann solver service...")
    Path(settings.output_dir).mkdir(parents=True, exist_ok=True)
    if settings.kernel_cache_enabled:
        Path(settings.kernel_cache_dir).mkdir(parents=True, exist_ok=True)
    logger.info(
        f"Outputs in {settings.output_dir}, kernel cache in {settings.kernel_cache_dir} "
        f"(enabled={settings.kernel_cache_enabled}), threads={settings.threads}"
    )

    yield

    logger.info("Shutting down Boltzmann solver service...")


def parse_origins(value: str) -> List[str]:
    """Comma-separated origins; ``*`` allows any."""
    if value.strip() == "*":
        return ["*"]
    return [origin.strip() for origin in value.split(",") if origin.strip()]


app = FastAPI(
    title="Boltzmann Solver API",
    description="Deterministic spectral, discrete-velocity and asymptotic-preserving Boltzmann solvers",
    version=VERSION,
    lifespan=lifespan,
)

app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)


@app.exception_handler(SolverError)
async def solver_error_handler(request: Request, exc: SolverError):
    """Solver errors that escaped a route's own mapping."""
    logger.error(f"{request.method} {request.url.path} failed: {exc}")
    return JSONResponse(status_code=500, content={"detail": str(exc), "error": type(exc).__name__})


@app.middleware("http")
async def time_requests(request: Request, call_next):
    """Log each request and report its wall time in ``X-Process-Time-Ms``."""
    start = time.perf_counter()
    client = request.client.host if request.client else "unknown"
    logger.info(f"-> {request.method} {request.url.path} | Client: {client}")

    response = await call_next(request)

    elapsed_ms = (time.perf_counter() - start) * 1000
    response.headers["X-Process-Time-Ms"] = f"{elapsed_ms:.2f}"
    logger.info(
        f"<- {request.method} {request.url.path} | Status: {response.status_code} | Time: {elapsed_ms:.2f}ms"
    )
    return response


app.add_middleware(
    CORSMiddleware,
    allow_origins=parse_origins(settings.allowed_origins),
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(scenarios.router, prefix="/api/scenarios", tags=["Scenarios"])
app.include_router(kernels.router, prefix="/api/kernels", tags=["Kernel Modes"])


@app.get("/")
async def root():
    """Service name, version and status."""
    return {"message": "Boltzmann Solver API", "version": VERSION, "status": "active"}


@app.get("/api/health")
async def health_check():
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("main:app", host=settings.host, port=settings.port, reload=False)
