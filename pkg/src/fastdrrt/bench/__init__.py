from .pipeline import Prepared, load_workspace, prepare, segment_problem
from .scenario import Scenario, load_scenario, perturb_targets, save_scenario
from .seeds import derive_seed

__all__ = [
    "Prepared", "load_workspace", "prepare", "segment_problem",
    "Scenario", "load_scenario", "perturb_targets", "save_scenario", "derive_seed",
]
