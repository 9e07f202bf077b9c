from .config import ConfigError, ExperimentConfig, build_config, load_config  # noqa: F401
from .io import ResultSet, read_results, report_csv, write_results  # noqa: F401
from .recipes import run_experiment  # noqa: F401
