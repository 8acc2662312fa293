"""Generate-select-refine: online task generation with value envelopes over GP-UCB inner loops."""

from .balance import BalanceEliminate
from .core import GsrRunner, RunLog, SchedulerConfig, run_gsr
from .engine import EngineConfig, TaskOptimizer
from .envelopes import EnvelopeConfig, ValueEnvelope
from .generators import DomainDoublingGenerator, MutationGenerator, MutationSchedule
from .gp import GpDataset, GpPosterior, KernelSpec, fit_posterior
from .tasks import TaskRegistry, TaskSchema, TaskSpec, TaskState
from .utility import BtWorld, CommitteeConfig, CommitteeOracle, DirectOracle, ObjectiveOracle, UtilityInterval

__all__ = [
    "BalanceEliminate", "BtWorld", "CommitteeConfig", "CommitteeOracle", "DirectOracle",
    "DomainDoublingGenerator", "EngineConfig", "EnvelopeConfig", "GpDataset", "GpPosterior", "GsrRunner",
    "KernelSpec", "MutationGenerator", "MutationSchedule", "ObjectiveOracle", "RunLog", "SchedulerConfig",
    "TaskOptimizer", "TaskRegistry", "TaskSchema", "TaskSpec", "TaskState", "UtilityInterval",
    "ValueEnvelope", "fit_posterior", "run_gsr",
]
