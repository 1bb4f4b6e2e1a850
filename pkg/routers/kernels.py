"""Kernel-mode routes.

Builds (or loads from the disk cache) the kernel-mode table for a grid and
kernel, and reports what a client needs to reuse it.
"""

import time

from fastapi import APIRouter, Request

from config import settings
from errors import SolverError
from logger import get_logger
from schemas.kernel import KernelBuildRequest, KernelBuildResponse
from schemas.scenario import KernelConfig
from utils.kernel_modes import compute_kernel_modes
from utils.rate_limit import limiter
from routers.scenarios import solver_http_error
from utils.scenarios import build_kernel, build_velocity_grid, kernel_summary

logger = get_logger(__name__)

router = APIRouter()


@router.post("/build", response_model=KernelBuildResponse)
@limiter.limit(settings.run_rate_limit)
def build(request: Request, body: KernelBuildRequest):
    """Build or load beta(l, m) for the requested grid and kernel.

    Returns:
        KernelBuildResponse: cache key, table shape, beta(0, 0), self-check
        defect and, with ``rank``, the certified separated error
    """
    start = time.perf_counter()
    try:
        grid = build_velocity_grid(body.grid)
        kernel = build_kernel(KernelConfig(kind=body.kind, alpha=body.alpha, c_alpha=body.c_alpha))
        km = compute_kernel_modes(grid, kernel, quadrature_level=body.quadrature_level)
        summary = kernel_summary(km, body.rank)
    except SolverError as exc:
        raise solver_http_error(exc)
    elapsed = time.perf_counter() - start
    logger.info(f"Kernel modes {summary['cache_key'][:12]} ready in {elapsed:.2f}s")
    return KernelBuildResponse(**summary, elapsed_seconds=elapsed)
