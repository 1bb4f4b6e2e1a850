from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional
from datetime import datetime


class AcceptanceCheck(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: Optional[str] = None


class ConvergenceRow(BaseModel):
    n: int
    error: float
    observed_order: Optional[float] = None
    extra: Dict[str, float] = Field(default_factory=dict)


class ConvergenceTable(BaseModel):
    study: str
    reference: str
    rows: List[ConvergenceRow]


class APRow(BaseModel):
    stepper: str
    epsilon: float
    stable: bool
    distance_to_equilibrium: Optional[float] = None
    euler_deviation: Optional[float] = None
    max_abs: Optional[float] = None


class RunReport(BaseModel):
    """Machine-readable summary written as report.json next to the series."""

    scenario: str
    kind: str
    seed: int
    threads: int
    started_at: datetime
    elapsed_seconds: float
    passed: bool
    checks: List[AcceptanceCheck] = Field(default_factory=list)
    conservation_defects: Dict[str, float] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)
    convergence: Optional[ConvergenceTable] = None
    ap_sweep: Optional[List[APRow]] = None
    outputs: List[str] = Field(default_factory=list)
