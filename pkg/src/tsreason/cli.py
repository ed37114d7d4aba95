"""Command-line entry point.

Subcommands: generate, annotate, review-serve, eval, score, sandbox,
advantages, stats. Settings merge as flags > environment > config file;
every artifact embeds the effective configuration so runs can be replayed.

Exit codes: 0 artifact fully written, 1 internal failure, 2 usage error,
3 missing input file, 4 endpoint unreachable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Any, Sequence

from .annotation import AnnotationStore, curate_task3, export_stage, run_analyzer_stage
from .battery import load_scenario, rank_options, simulate
from .core import (
    RecordError,
    Sample,
    Split,
    TaskKind,
    read_dataset,
    write_dataset,
)
from .forge import GenConfig, SplitRules, assign_split, build_dataset
from .forge.build import dataset_meta
from .gateway import ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL, ChatClient, TransportError
from .harness import (
    DraftRewriter,
    GatewayResponder,
    GoldResponder,
    OracleResponder,
    RandomResponder,
    Responder,
    ScriptedResponder,
    run_eval,
    score_sample,
)
from .prompts import MODE_ANS, MODE_COT
from .rewards import DEFAULT_ALPHA, DEFAULT_LAMBDA, GrpoConfig, RolloutGroup, group_advantages

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_ENDPOINT = 4

_GRPO = GrpoConfig()

_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "task": "all",
    "n": 4,
    "split_rules": None,
    "endpoint": None,
    "model": None,
    "api_key": None,
    "mode": MODE_COT,
    "lambda": DEFAULT_LAMBDA,
    "alpha": DEFAULT_ALPHA,
    "epsilon": _GRPO.epsilon,
    "beta": _GRPO.beta,
    "group_size": _GRPO.group_size,
    "concurrency": 8,
    "out": None,
}

_ENV_KEYS = {"endpoint": ENV_ENDPOINT, "model": ENV_MODEL, "api_key": ENV_API_KEY}

_TASK_NAMES = {
    "scenario": TaskKind.SCENARIO,
    "causality": TaskKind.CAUSALITY,
    "forecast": TaskKind.FORECAST,
    "decision": TaskKind.DECISION,
}


class CliError(RuntimeError):
    def __init__(self, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.code = code


def _read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"input file not found: {path}", EXIT_MISSING_FILE)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}", EXIT_FAILURE)


def effective_config(args: argparse.Namespace) -> dict[str, Any]:
    """flags > environment > config file > built-in defaults."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = _read_json(args.config)
        if not isinstance(file_cfg, dict):
            raise CliError(f"{args.config}: config must be a JSON object", EXIT_USAGE)
        unknown = sorted(set(file_cfg) - set(_DEFAULTS))
        if unknown:
            raise CliError(f"{args.config}: unknown config keys: {', '.join(unknown)}", EXIT_USAGE)
        merged.update(file_cfg)
    for key, env_name in _ENV_KEYS.items():
        value = os.environ.get(env_name)
        if value:
            merged[key] = value
    for key in _DEFAULTS:
        attr = "lambda_" if key == "lambda" else key
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    return merged


def _public_config(cfg: dict[str, Any]) -> dict[str, Any]:
    out = {k: v for k, v in cfg.items() if k != "api_key"}
    out["api_key_set"] = bool(cfg.get("api_key"))
    return out


def _require_input(path: str | None, flag: str) -> str:
    if not path:
        raise CliError(f"{flag} is required", EXIT_USAGE)
    if not os.path.exists(path):
        raise CliError(f"input file not found: {path}", EXIT_MISSING_FILE)
    return path


def _atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write_dataset(path: str, samples: Sequence[Sample], meta: dict[str, Any]) -> None:
    tmp = path + ".tmp"
    write_dataset(tmp, samples, meta)
    os.replace(tmp, path)


def _jsonl(meta: dict[str, Any], rows: Sequence[dict[str, Any]]) -> str:
    lines = [json.dumps({"_meta": meta}, ensure_ascii=False, sort_keys=True)]
    lines.extend(json.dumps(row, ensure_ascii=False) for row in rows)
    return "\n".join(lines) + "\n"


def load_split_rules(path: str) -> SplitRules:
    record = _read_json(path)
    try:
        tag_splits = {tag: Split(name) for tag, name in record.get("tag_splits", {}).items()}
        return SplitRules(
            tag_splits=tag_splits,
            seed=int(record.get("seed", 0)),
            train_fraction=float(record.get("train_fraction", 0.8)),
            stage1_fraction=float(record.get("stage1_fraction", 0.2)),
            allow_untagged=bool(record.get("allow_untagged", False)),
        )
    except (ValueError, AttributeError, TypeError) as exc:
        raise CliError(f"{path}: bad split rules: {exc}", EXIT_USAGE)


def _gateway_client(cfg: dict[str, Any]) -> ChatClient:
    if not cfg["endpoint"]:
        raise CliError("--endpoint (or its environment variable) is required", EXIT_USAGE)
    if not cfg["model"]:
        raise CliError("--model (or its environment variable) is required", EXIT_USAGE)
    return ChatClient(
        base_url=cfg["endpoint"],
        model=cfg["model"],
        api_key=cfg["api_key"],
        max_in_flight=int(cfg["concurrency"]),
    )


def _probe_endpoint(client: ChatClient) -> None:
    try:
        client.complete("Connectivity check.", "Reply with OK.", max_tokens=8)
    except TransportError as exc:
        raise CliError(f"endpoint unreachable: {exc}", EXIT_ENDPOINT)


# -- subcommands ----------------------------------------------------------------


def _cmd_generate(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    tasks = list(TaskKind) if cfg["task"] == "all" else [_TASK_NAMES[cfg["task"]]]
    counts = tuple((task, split, int(cfg["n"])) for task in tasks for split in Split)
    gen_cfg = GenConfig(seed=int(cfg["seed"]), counts=counts)
    samples = build_dataset(gen_cfg)
    if cfg["split_rules"]:
        rules = load_split_rules(cfg["split_rules"])
        samples = [replace(s, split=assign_split(s, rules)) for s in samples]
    out = cfg["out"] or "dataset.jsonl"
    meta = {"command": "generate", "config": _public_config(cfg), "generation": dataset_meta(gen_cfg)}
    _atomic_write_dataset(out, samples, meta)
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def _mock_analyzer(dataset: Sequence[Sample], kind: str) -> Responder:
    if kind == "oracle":
        return OracleResponder(dataset)
    if kind == "gold":
        return GoldResponder(dataset)
    if kind == "wrong":
        return ScriptedResponder("<think>unsure.</think><answer>none</answer>", name="wrong")
    raise CliError(f"unknown analyzer kind {kind!r}", EXIT_USAGE)


def _cmd_annotate(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    data_path = _require_input(args.data, "--data")
    dataset = read_dataset(data_path)
    out_dir = cfg["out"] or "annotation_run"
    os.makedirs(out_dir, exist_ok=True)

    if cfg["endpoint"]:
        client = _gateway_client(cfg)
        _probe_endpoint(client)
        analyzer: Responder = GatewayResponder(client, mode=MODE_COT)
    else:
        analyzer = _mock_analyzer(dataset, args.analyzer)

    store = AnnotationStore(os.path.join(out_dir, "events.log"))
    moved = run_analyzer_stage(store, dataset, analyzer)
    selected, short = curate_task3(store, budget=args.budget)
    meta = {"command": "annotate", "config": _public_config(cfg)}
    for stage_name in ("stage1", "stage2"):
        exported = export_stage(store, dataset, stage_name)
        _atomic_write_dataset(os.path.join(out_dir, f"{stage_name}.jsonl"), exported, meta)
    counts = store.stage_counts()
    print(f"analyzer: {moved}")
    print(f"curated: {len(selected)}" + (" (pool under budget)" if short else ""))
    print(f"stages: {json.dumps(counts, sort_keys=True)}")
    return EXIT_OK


def _cmd_review_serve(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    data_path = _require_input(args.data, "--data")
    dataset = read_dataset(data_path)
    store = AnnotationStore(args.events)
    if args.analyzer != "none":
        if cfg["endpoint"]:
            client = _gateway_client(cfg)
            _probe_endpoint(client)
            analyzer: Responder = GatewayResponder(client, mode=MODE_COT)
        else:
            analyzer = _mock_analyzer(dataset, args.analyzer)
        run_analyzer_stage(store, dataset, analyzer)
    app = create_app(
        store,
        dataset,
        rewriter=DraftRewriter(dataset),
        config=ServiceConfig(show_analyzer_attempt=not args.hide_attempt),
    )
    print(f"serving review API on http://{args.host}:{args.port}", flush=True)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _make_responder(cfg: dict[str, Any], kind: str, dataset: Sequence[Sample]) -> Responder:
    if kind == "gateway":
        client = _gateway_client(cfg)
        _probe_endpoint(client)
        return GatewayResponder(client, mode=cfg["mode"])
    if kind == "random":
        return RandomResponder(seed=int(cfg["seed"]))
    return _mock_analyzer(dataset, kind)


def _cmd_eval(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    data_path = _require_input(args.data, "--data")
    dataset = read_dataset(data_path)
    responder = _make_responder(cfg, args.responder, dataset)
    result = run_eval(
        dataset,
        responder,
        mode=cfg["mode"],
        concurrency=int(cfg["concurrency"]),
        lambda_=float(cfg["lambda"]),
        alpha=float(cfg["alpha"]),
        extra_config={"seed": int(cfg["seed"])},
    )
    out = cfg["out"] or "eval_report"
    report_record = {"config": _public_config(cfg), "report": result.report.to_record()}
    _atomic_write_text(f"{out}.json", json.dumps(report_record, ensure_ascii=False, indent=2) + "\n")
    _atomic_write_text(f"{out}.txt", result.report.render_text() + "\n")
    _atomic_write_text(
        f"{out}.records.jsonl",
        _jsonl({"config": _public_config(cfg)}, [r.to_record() for r in result.records]),
    )
    print(result.report.render_text())
    return EXIT_OK


def _cmd_score(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    responses_path = _require_input(args.responses, "--responses")
    data_path = _require_input(args.data, "--data")
    dataset = {sample.id: sample for sample in read_dataset(data_path)}
    rows = []
    with open(responses_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith('{"_meta"'):
                continue
            record = json.loads(line)
            sid = record.get("sample_id")
            sample = dataset.get(sid)
            if sample is None:
                raise CliError(f"{responses_path}:{lineno}: unknown sample id {sid!r}", EXIT_FAILURE)
            scored = score_sample(
                sample, record.get("raw", ""), lambda_=float(cfg["lambda"]), alpha=float(cfg["alpha"])
            )
            rows.append(scored.to_record())
    out = cfg["out"] or "scores.jsonl"
    _atomic_write_text(out, _jsonl({"command": "score", "config": _public_config(cfg)}, rows))
    mean_total = sum(r["reward_total"] for r in rows) / len(rows) if rows else 0.0
    print(f"scored {len(rows)} responses; mean total reward {mean_total:.4f}")
    return EXIT_OK


def _cmd_sandbox(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    scenario_path = _require_input(args.scenario, "--scenario")
    try:
        scenario = load_scenario(scenario_path)
    except (RecordError, json.JSONDecodeError) as exc:
        raise CliError(f"{scenario_path}: {exc}", EXIT_FAILURE)
    forecast = scenario.history.values[-24:]
    ranked = rank_options(scenario.options, forecast, scenario.spec, scenario.prices)
    rows = []
    for option in ranked:
        sim = simulate(option.strategy, scenario.actual_load, scenario.spec, scenario.prices)
        rows.append(
            {
                "letter": option.letter,
                "saving": option.saving,
                "feasible": option.feasible,
                "reason": option.reason,
                "exact_saving": sim.exact_saving,
            }
        )
        flag = "" if option.feasible else f"  [{option.reason}]"
        print(f"{option.letter}  saving={option.saving:.4f}  exact={sim.exact_saving:.4f}{flag}")
    best = next((r["letter"] for r in rows if r["feasible"]), rows[0]["letter"])
    print(f"answer: {best}")
    if cfg["out"]:
        artifact = {"config": _public_config(cfg), "options": rows, "answer": best}
        _atomic_write_text(cfg["out"], json.dumps(artifact, ensure_ascii=False, indent=2) + "\n")
    return EXIT_OK


def _cmd_advantages(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    rewards_path = _require_input(args.rewards, "--rewards")
    rows = []
    with open(rewards_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith('{"_meta"'):
                continue
            record = json.loads(line)
            rewards = record.get("rewards")
            if not isinstance(rewards, list) or not rewards:
                raise CliError(f"{rewards_path}:{lineno}: expected a non-empty rewards array", EXIT_FAILURE)
            group = RolloutGroup(tuple(float(r) for r in rewards), group_id=str(record.get("group_id", "")))
            record["advantages"] = group_advantages(group)
            rows.append(record)
    out = cfg["out"] or "advantages.jsonl"
    _atomic_write_text(out, _jsonl({"command": "advantages", "config": _public_config(cfg)}, rows))
    print(f"wrote advantages for {len(rows)} groups to {out}")
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    data_path = _require_input(args.data, "--data")
    dataset = read_dataset(data_path)
    counts: dict[TaskKind, dict[Split, int]] = {
        task: {split: 0 for split in Split} for task in TaskKind
    }
    for sample in dataset:
        counts[sample.task][sample.split] += 1
    header = ["task".ljust(26)] + [split.value.rjust(13) for split in Split] + ["total".rjust(8)]
    lines = ["".join(header)]
    for task in TaskKind:
        row = [task.value.ljust(26)]
        row += [str(counts[task][split]).rjust(13) for split in Split]
        row.append(str(sum(counts[task].values())).rjust(8))
        lines.append("".join(row))
    totals = ["total".ljust(26)]
    totals += [str(sum(counts[t][s] for t in TaskKind)).rjust(13) for s in Split]
    totals.append(str(len(dataset)).rjust(8))
    lines.append("".join(totals))
    table = "\n".join(lines)
    print(table)
    if cfg["out"]:
        artifact = {
            "config": _public_config(cfg),
            "counts": {t.value: {s.value: counts[t][s] for s in Split} for t in TaskKind},
            "total": len(dataset),
        }
        _atomic_write_text(cfg["out"], json.dumps(artifact, ensure_ascii=False, indent=2) + "\n")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--task", choices=sorted(_TASK_NAMES) + ["all"])
    p.add_argument("--n", type=int)
    p.add_argument("--split-rules", dest="split_rules", help="JSON tag-to-split routing rules")
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--api-key", dest="api_key")
    p.add_argument("--mode", choices=[MODE_COT, MODE_ANS])
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--group-size", dest="group_size", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--out")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="tsreason", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="synthesize a dataset file")

    p = sub.add_parser("annotate", parents=[common], help="run the annotation pipeline")
    p.add_argument("--data", help="dataset file to annotate")
    p.add_argument("--analyzer", choices=["oracle", "gold", "wrong"], default="oracle")
    p.add_argument("--budget", type=int, default=400, help="forecast curation budget")

    p = sub.add_parser("review-serve", parents=[common], help="serve the review HTTP API")
    p.add_argument("--data", help="dataset file backing the queue")
    p.add_argument("--events", help="event log path (persistent store)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--analyzer", choices=["none", "oracle", "gold", "wrong"], default="none")
    p.add_argument("--hide-attempt", action="store_true", help="hide analyzer attempts from reviewers")

    p = sub.add_parser("eval", parents=[common], help="run an evaluation and report metrics")
    p.add_argument("--data", help="dataset file to evaluate on")
    p.add_argument("--responder", choices=["gateway", "oracle", "gold", "random"], default="gateway")

    p = sub.add_parser("score", parents=[common], help="re-score a stored response file")
    p.add_argument("--responses", help="JSONL file of raw responses")
    p.add_argument("--data", help="dataset file with gold answers")

    p = sub.add_parser("sandbox", parents=[common], help="rank battery strategies for a scenario file")
    p.add_argument("--scenario", help="battery scenario JSON file")

    p = sub.add_parser("advantages", parents=[common], help="compute group advantages from rewards")
    p.add_argument("--rewards", help="JSONL file with a rewards array per line")

    p = sub.add_parser("stats", parents=[common], help="per-task and per-split dataset counts")
    p.add_argument("--data", help="dataset file to count")

    return parser


_COMMANDS = {
    "generate": _cmd_generate,
    "annotate": _cmd_annotate,
    "review-serve": _cmd_review_serve,
    "eval": _cmd_eval,
    "score": _cmd_score,
    "sandbox": _cmd_sandbox,
    "advantages": _cmd_advantages,
    "stats": _cmd_stats,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
        return _COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except TransportError as exc:
        print(f"error: endpoint unreachable: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except FileNotFoundError as exc:
        print(f"error: input file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (RecordError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
