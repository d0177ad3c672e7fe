# Environment-driven settings for the spot-ring toolkit
import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


@dataclass(frozen=True)
class Settings:
    """Process-wide settings, read once from the environment (and a .env file if present)"""

    database_url: str = field(default_factory=lambda: os.getenv("DATABASE_URL", "sqlite:///./spot_rings.db"))
    output_dir: Path = field(default_factory=lambda: Path(os.getenv("SPOTRINGS_OUTPUT_DIR", "./output")))
    log_level: str = field(default_factory=lambda: os.getenv("SPOTRINGS_LOG_LEVEL", "INFO").upper())
    threads: int = field(default_factory=lambda: int(os.getenv("SPOTRINGS_THREADS", "1")))
    kernel_source: str = field(default_factory=lambda: os.getenv("SPOTRINGS_KERNEL", "builtin:fig1"))


settings = Settings()

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
