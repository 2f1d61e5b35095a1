from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional
import os
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SHAPLEY_FOREST_",
        case_sensitive=False,
        extra="allow",
    )

    # App
    app_name: str = "shapley-forest"
    app_version: str = "0.1.0"
    log_level: str = "INFO"

    # Execution
    n_jobs: int = 1
    output_dir: str = os.getenv("SHAPLEY_FOREST_OUTPUT_DIR", "results")

    # Forest defaults
    num_trees: int = 500
    min_node_size: int = 5

    # Subset sampling
    num_subsets: int = 500
    complement_floor: Optional[float] = None

    # Value estimators
    marginal_draws: int = 30
    retrain_depth_cap: int = 6
    retrain_small_subset: int = 2

    # Solver
    solver_strict: bool = False
    solver_tolerance: float = 1e-8
    solver_max_sweeps: int = 10_000

    # Ground truth
    pd_tolerance: float = 1e-10
    v_star_budget: int = 100_000

    # Reports
    plot_format: str = "svg"


settings = Settings()
