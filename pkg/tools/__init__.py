from .list_experiments import list_experiments
from .run_experiment import run_experiment
from .summarize_results import summarize_results
from .optimize_trial import optimize_trial
from .selftest import selftest

__all__ = [
    "list_experiments",
    "run_experiment",
    "summarize_results",
    "optimize_trial",
    "selftest",
]
