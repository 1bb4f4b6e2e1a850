from pydantic import BaseModel, Field
from typing import Optional

from schemas.scenario import GridConfig, KernelKind


class KernelBuildRequest(BaseModel):
    grid: GridConfig = GridConfig()
    kind: KernelKind = KernelKind.MAXWELL
    alpha: float = 0.0
    c_alpha: Optional[float] = None
    quadrature_level: Optional[int] = Field(None, ge=1)
    rank: Optional[int] = Field(None, ge=1)  # also report the separated error at this rank


class KernelBuildResponse(BaseModel):
    cache_key: str
    kernel: str
    n_modes: int
    table_shape: list
    beta_origin: float
    self_check_defect: Optional[float] = None
    rank: Optional[int] = None
    reconstruction_error: Optional[float] = None
    elapsed_seconds: float
