"""Coverage-guided evolutionary fuzzing of multi-method service interfaces."""

from .core import (
    CampaignConfig,
    Community,
    ExecutionResult,
    FitnessKind,
    GlobalCoverageState,
    Individual,
    MethodSignature,
    Outcome,
    Population,
    SelectionKind,
    ServiceDescriptor,
    Value,
    ValueType,
    validate_individual,
)
from .genome import Rng
from .harness import Call, ProcessHarness, SyntheticService, TargetError, generate_benchmark, load_target
from .campaign import ReplayError, TestRecord, coverage_summary, replay, run_campaign

__version__ = "0.1.0"
