"""Scenario routes.

Provides endpoints for:
- Listing the scenario kinds
- Running one scenario synchronously and returning its report
"""

from pathlib import Path
from typing import List

from fastapi import APIRouter, HTTPException, Request, status

from config import settings
from errors import (
    AcceptanceCheckError,
    ConfigValidationError,
    InvalidParameterError,
    ResourceGuardError,
    SolverError,
)
from logger import get_logger
from schemas.report import RunReport
from schemas.scenario import ScenarioConfig, ScenarioKind
from utils.rate_limit import limiter
from utils.scenarios import run_scenario

logger = get_logger(__name__)

router = APIRouter()


def solver_http_error(exc: SolverError) -> HTTPException:
    """Map a solver error onto the HTTP status a client can act on."""
    if isinstance(exc, ConfigValidationError):
        return HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=[{"field": field, "message": message} for field, message in exc.errors],
        )
    if isinstance(exc, InvalidParameterError):
        return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc))
    if isinstance(exc, ResourceGuardError):
        return HTTPException(status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE, detail=str(exc))
    return HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(exc))


@router.get("/kinds", response_model=List[str])
async def list_kinds():
    """Scenario kinds accepted by POST /run."""
    return [kind.value for kind in ScenarioKind]


@router.post("/run", response_model=RunReport)
@limiter.limit(settings.run_rate_limit)
def run(request: Request, cfg: ScenarioConfig):
    """Run a scenario and return its report.

    The resource guards always apply here. Failed acceptance gates are not
    an HTTP error: the report comes back with ``passed = false``.

    Args:
        cfg: Scenario configuration (same schema as the TOML files)

    Returns:
        RunReport: checks, metrics, timings and output paths
    """
    out_dir = Path(settings.output_dir) / "api" / cfg.label
    try:
        return run_scenario(cfg, out_dir=out_dir, force=False)
    except AcceptanceCheckError as exc:
        logger.warning(f"Scenario {cfg.label} finished with failed checks")
        return exc.report
    except SolverError as exc:
        raise solver_http_error(exc)
