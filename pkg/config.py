"""Application configuration management.

This module handles all solver and service settings loaded from environment
variables. Settings are cached for performance using LRU cache.
"""

from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    """Solver and service settings loaded from environment variables.

    All settings can be overridden via .env file or environment variables.
    """

    # Moment computation
    rho_floor: float = 1e-12  # Density below which u and T are undefined
    negativity_tolerance: float = 1e-10  # entropy() rejects f_j below -tol
    imaginary_tolerance: float = 1e-10  # Inverse transform residue warning threshold

    # Kernel modes
    quadrature_level: int = 2  # Default resolution multiplier for beta(l, m)
    quadrature_self_check_tolerance: float = 1e-6
    kernel_cache_dir: str = ".kernel_cache"
    kernel_cache_enabled: bool = True

    # Resource guards and parallelism
    oracle_max_points: int = 24  # Oracle refuses larger n_per_dim unless forced
    threads: int = 1  # Worker threads (kernel tables, DVM chunks, spatial cells)
    dvm_chunk_size: int = 65536  # Quadruples per DVM reduction chunk

    # Time integration
    penalization_constant: float = 1.0  # mu = c * rho
    penalization_floor: float = 1e-12  # Lower bound applied to mu
    blowup_factor: float = 1e3  # max|f| growth flagged as unstable

    # Outputs
    output_dir: str = "runs"
    log_dir: str = "logs"
    log_level: str = "INFO"  # Console threshold: DEBUG, INFO, DIAG, WARNING, ERROR

    # Server Configuration
    host: str = "0.0.0.0"  # Server host (default: all interfaces)
    port: int = 8000  # Server port (default: 8000)
    run_rate_limit: str = "5/minute"  # Scenario runs are CPU heavy

    # CORS Configuration
    # Comma-separated list of allowed origins. Set to "*" for development.
    allowed_origins: str = "*"

    class Config:
        env_file = ".env"
        case_sensitive = False


@lru_cache()
def get_settings():
    """Create and cache settings instance.

    Uses LRU cache to ensure settings are only loaded once,
    so every module sees the same floors, tolerances and paths.

    Returns:
        Settings: Cached settings instance
    """
    return Settings()


# Global settings instance used throughout the application
settings = get_settings()
