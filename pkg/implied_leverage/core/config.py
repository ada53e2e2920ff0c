from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import List


class Settings(BaseSettings):
    """Library and service settings with environment variable support."""
    
    # Application Settings
    debug: bool = False
    log_level: str = "WARNING"
    seed: int = 42
    
    # Leverage estimator
    n_boot: int = 500
    bootstrap_workers: int = 1
    min_lag_overlap: int = 30
    
    # Implied-vol regressions
    min_regression_obs: int = 30
    robust_cov_type: str = "HC1"
    degenerate_variance: float = 1e-16
    
    # Simulator
    vol_floor_frac: float = 0.1
    max_clamp_fraction: float = 0.001
    panel_floor_frac: float = 0.1
    kernel_stability_margin: float = 0.5
    warmup_multiple: int = 10
    
    # Output
    output_digits: int = 9
    trading_days_per_year: int = 252
    
    # HTTP service
    max_requests_per_minute: int = 10
    allowed_origins: List[str] = ["http://localhost:8000", "http://127.0.0.1:8000"]
    api_max_sim_days: int = 262144
    
    model_config = SettingsConfigDict(
        env_prefix="IMPLIED_LEVERAGE_",
        env_file=".env",
        case_sensitive=False
    )


settings = Settings()
