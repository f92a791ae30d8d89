import os
from dotenv import load_dotenv

load_dotenv()

class Settings:
    # Paths (the only values environment variables may override)
    CONFIG_DIR: str = os.getenv("MALSPREAD_CONFIG_DIR", "config")
    OUTPUT_DIR: str = os.getenv("MALSPREAD_OUTPUT_DIR", "output")

    # Run ledger
    DATABASE_URL: str = os.getenv("DATABASE_URL", "sqlite:///./malspread_runs.db")

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # App settings
    VERSION: str = "1.0.0"
    DICTIONARY_FORMAT_VERSION: int = 1
    PROJECT_NAME: str = "Malware Spread Analyzer"

settings = Settings()
