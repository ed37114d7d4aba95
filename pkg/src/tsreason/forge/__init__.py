"""Dataset synthesis: raw corpora, QA sample builders, splits, ingestion."""

from .corpus import Corpus, GenConfig, RiverGraph, synth_corpus
from .ingest import IngestReport, IngestSchema, ingest_series, load_edge_list
from .qa import (
    SplitRules,
    assign_split,
    gen_causality_qa,
    gen_decision_qa,
    gen_forecast_qa,
    gen_scenario_qa,
)
from .build import build_dataset

__all__ = [
    "Corpus",
    "GenConfig",
    "RiverGraph",
    "synth_corpus",
    "IngestReport",
    "IngestSchema",
    "ingest_series",
    "load_edge_list",
    "SplitRules",
    "assign_split",
    "gen_causality_qa",
    "gen_decision_qa",
    "gen_forecast_qa",
    "gen_scenario_qa",
    "build_dataset",
]
