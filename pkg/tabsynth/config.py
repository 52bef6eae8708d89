import os

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    threads: int | None = None
    log_level: str = "INFO"
    sample_chunk_rows: int = 512

    model_config = {"env_prefix": "TABSYNTH_"}

    def resolve_threads(self, override: int | None = None) -> int:
        """Return the worker cap.

        Priority: --threads flag > TABSYNTH_THREADS > available CPUs.
        """
        if override is not None and override > 0:
            return override
        if self.threads is not None and self.threads > 0:
            return self.threads
        return os.cpu_count() or 1


settings = Settings()
