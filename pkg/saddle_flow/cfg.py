from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Output location for CSV / JSON artifacts (SADDLE_FLOW_OUT)
    out: str = "./out"

    # Logging
    log_level: str = "INFO"

    # Integrator defaults
    fixed_step: float = 1e-3
    rtol: float = 1e-9
    atol: float = 1e-12
    sample_interval: float = 0.01

    model_config = SettingsConfigDict(
        env_prefix="SADDLE_FLOW_",
        env_file=".env",
        extra="ignore",
    )


settings = Settings()


def get_settings() -> Settings:
    """Re-read the environment; the CLI calls this so overrides set after import apply."""
    return Settings()
