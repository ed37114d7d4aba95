"""Reasoning-critical time-series QA: dataset synthesis, verifiable rewards,
deterministic solvers, evaluation harness, and an annotation pipeline."""

from .core import (
    Choice,
    EventRecord,
    RecordError,
    Sample,
    SequenceAnswer,
    Split,
    TaskKind,
    TimeSeries,
    canonical_decode,
    canonical_encode,
    read_dataset,
    sample_id,
    validate_sample,
    write_dataset,
)
from .parsing import ParsedResponse, parse_response
from .rewards import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    GrpoConfig,
    RewardBreakdown,
    RolloutGroup,
    discrete_reward,
    format_reward,
    grpo_objective,
    group_advantages,
    score_response,
    sequence_reward,
    sft_nll,
    total_reward,
)
from .battery import (
    BatterySpec,
    PriceSchedule,
    RankedOption,
    Scenario,
    SimResult,
    Strategy,
    formula_saving,
    load_scenario,
    parse_decision_context,
    parse_strategy,
    rank_options,
    render_decision_context,
    render_strategy,
    save_scenario,
    simulate,
)
from .cards import ScenarioCard, parse_card, render_card
from .oracles import OracleTrace, solve, solve_causality, solve_decision, solve_forecast, solve_scenario
from .prompts import MODE_ANS, MODE_COT, render_prompts, system_prompt, user_prompt
from .gateway import ChatClient, TransportError
from .harness import (
    DraftRewriter,
    EvalReport,
    EvalResult,
    GatewayResponder,
    GoldResponder,
    GoldRewriter,
    OracleResponder,
    RandomResponder,
    ReplayResponder,
    ScriptedResponder,
    aggregate,
    collect_rollouts,
    principle_gap,
    run_eval,
    score_sample,
    strip_context,
    sufficiency_probe,
)
from .annotation import (
    AnnotationRecord,
    AnnotationStore,
    HumanVerdict,
    Stage,
    analyzer_pass,
    curate_task3,
    export_stage,
    next_review,
    register_samples,
    rewriter_pass,
    submit_review,
)
from .forge import GenConfig, SplitRules, assign_split, build_dataset, synth_corpus

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
