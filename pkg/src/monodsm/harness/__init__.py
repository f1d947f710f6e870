from .config import ExperimentConfig, build_config, load_config, parse_config
from .runner import RunArtifacts, list_operators, peano_compare, probe, run, sweep_eps
