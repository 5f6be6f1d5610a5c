import dotenv
from pydantic_settings import BaseSettings

dotenv.load_dotenv()

OUTPUT_FOLDER = ".runs"


class Settings(BaseSettings):
    ENV: str = "dev"
    DEBUG: bool = False

    # Engine
    WORKERS: int = 1
    BUDGET_CELLS: int = 2_000_000_000
    REORTHONORMALIZE_EVERY: int = 256

    # Theory
    STRONG_NOISE_THRESHOLD: float = 0.1

    # Analysis
    SHUFFLE_REORDERINGS: int = 1000
    QPN_REORDERINGS: int = 100
    FIT_STARTS: int = 4

    # Filter functions, cutoff at 2pi / (periods * sequence duration)
    LOW_FREQUENCY_CUTOFF_PERIODS: float = 100.0

    # Output
    OUTPUT_FOLDER: str = OUTPUT_FOLDER
    CSV_FLOAT_FORMAT: str = ".17g"

    def is_dev(self):
        return self.ENV == "dev"


settings = Settings()
