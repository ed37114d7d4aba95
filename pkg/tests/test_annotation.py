import json

import pytest
from fastapi.testclient import TestClient

from conftest import wrap
from tsreason.annotation import (
    AnnotationStore,
    ConflictError,
    HumanVerdict,
    Stage,
    TransitionError,
    analyzer_pass,
    curate_task3,
    export_stage,
    fold_events,
    next_review,
    register_samples,
    rewriter_pass,
    run_analyzer_stage,
    run_rewriter_stage,
    submit_review,
)
from tsreason.core import Choice, SequenceAnswer, TaskKind, canonical_decode
from tsreason.gateway import TransportError
from tsreason.harness import (
    DraftRewriter,
    GoldResponder,
    GoldRewriter,
    ScriptedResponder,
    score_sample,
)
from tsreason.parsing import parse_response
from tsreason.prompts import DRAFT_MARKER, user_prompt
from tsreason.rewards import mae
from tsreason.service import ServiceConfig, create_app


class WrongAnswers:
    """Parseable but always wrong: a non-gold letter for discrete tasks, gold
    shifted by +1.0 everywhere for forecasts (so sequence error is finite).
    Accepts rewrite prompts by stripping the draft suffix."""

    name = "wrong"

    def __init__(self, dataset):
        self._samples = {user_prompt(s): s for s in dataset}

    def respond(self, system, user):
        sample = self._samples.get(user.split(DRAFT_MARKER, 1)[0])
        if sample is None:
            raise TransportError("prompt does not belong to this corpus")
        if isinstance(sample.gold, Choice):
            letter = next(l for l in sample.option_letters if l != sample.gold.letter)
            return wrap(letter)
        return wrap(", ".join(repr(v + 1.0) for v in sample.gold.values))


class OffsetAnalyzer:
    """Gold forecast values shifted by a per-sample offset."""

    name = "offset"

    def __init__(self, dataset, deltas):
        self._table = {user_prompt(s): (s, deltas[s.id]) for s in dataset if s.id in deltas}

    def respond(self, system, user):
        sample, delta = self._table[user]
        return wrap(", ".join(repr(v + delta) for v in sample.gold.values))


class DownResponder:
    name = "down"

    def __init__(self):
        self.calls = 0

    def respond(self, system, user):
        self.calls += 1
        raise TransportError("endpoint unreachable")


@pytest.fixture(scope="module")
def tasks(small_dataset):
    groups = {kind: [] for kind in TaskKind}
    for sample in small_dataset:
        groups[sample.task].append(sample)
    return groups


def fresh(samples, path=None):
    store = AnnotationStore(path)
    register_samples(store, samples)
    return store


# -- event log and folding ------------------------------------------------------


def test_register_counts_and_idempotence(tasks):
    samples = tasks[TaskKind.SCENARIO][:3]
    store = AnnotationStore()
    assert register_samples(store, samples) == 3
    assert register_samples(store, samples) == 0
    assert len(store.events) == 3
    orders = [store.get(s.id).order for s in samples]
    assert orders == [0, 1, 2]


def test_double_register_event_raises_and_persists_nothing(tasks):
    sample = tasks[TaskKind.SCENARIO][0]
    store = fresh([sample])
    before = len(store.events)
    with pytest.raises(TransitionError):
        store.append(
            {"type": "registered", "sample_id": sample.id, "task": sample.task.value, "at": 0.0}
        )
    assert len(store.events) == before


def test_event_for_unregistered_sample_raises():
    store = AnnotationStore()
    with pytest.raises(TransitionError):
        store.append({"type": "leased", "sample_id": "ghost", "reviewer": "amy", "at": 0.0})


def test_unknown_event_type_raises(tasks):
    sample = tasks[TaskKind.CAUSALITY][0]
    store = fresh([sample])
    with pytest.raises(TransitionError):
        store.append({"type": "promoted", "sample_id": sample.id, "at": 0.0})


def test_replay_from_log_is_bit_exact(tasks, tmp_path):
    samples = tasks[TaskKind.SCENARIO][:2] + tasks[TaskKind.FORECAST][:2]
    path = str(tmp_path / "events.log")
    store = fresh(samples, path)
    wrong = WrongAnswers(samples)
    for sample in samples:
        analyzer_pass(store, sample, wrong, now=1.0)
    leased = next_review(store, "amy", now=2.0)
    submit_review(
        store,
        leased.sample_id,
        HumanVerdict(sufficient=True, reasoning="the pattern gate settles it.", reviewer_id="amy"),
        now=3.0,
    )
    curate_task3(store, budget=1, now=4.0)

    reloaded = AnnotationStore(path)
    assert reloaded.events == store.events
    assert reloaded.records() == store.records()
    assert fold_events(store.events) == store.records()


def test_log_lines_are_json_with_sequential_seq(tasks, tmp_path):
    samples = tasks[TaskKind.DECISION][:2]
    path = str(tmp_path / "events.log")
    store = fresh(samples, path)
    analyzer_pass(store, samples[0], GoldResponder(samples), now=9.0)
    with open(path, encoding="utf-8") as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    assert [e["seq"] for e in events] == [0, 1, 2]
    assert events[2]["type"] == "analyzed"
    assert events[2]["at"] == 9.0


# -- analyzer pass ----------------------------------------------------------------


def test_correct_discrete_answer_closes_sample(tasks):
    sample = tasks[TaskKind.CAUSALITY][0]
    store = fresh([sample])
    record = analyzer_pass(store, sample, GoldResponder([sample]))
    assert record.stage is Stage.STEP1_SOLVED
    assert record.analyzer_correct
    assert sample.gold.letter in record.analyzer_output
    assert record.mae is None


def test_wrong_discrete_answer_queues_review(tasks):
    sample = tasks[TaskKind.SCENARIO][0]
    store = fresh([sample])
    record = analyzer_pass(store, sample, WrongAnswers([sample]))
    assert record.stage is Stage.REVIEW_QUEUED
    assert not record.analyzer_correct


def test_exact_forecast_closes_inexact_waits(tasks):
    exact, near = tasks[TaskKind.FORECAST][:2]
    store = fresh([exact, near])
    gold_rec = analyzer_pass(store, exact, GoldResponder([exact]))
    assert gold_rec.stage is Stage.STEP1_SOLVED
    assert gold_rec.mae == 0.0

    near_rec = analyzer_pass(store, near, WrongAnswers([near]))
    assert near_rec.stage is Stage.PENDING
    assert near_rec.mae == pytest.approx(1.0, abs=1e-9)


def test_unparseable_forecast_has_no_error_score(tasks):
    sample = tasks[TaskKind.FORECAST][0]
    store = fresh([sample])
    record = analyzer_pass(store, sample, ScriptedResponder(wrap("no idea")))
    assert record.stage is Stage.PENDING
    assert record.mae is None
    # wrong length is graded the same way: no usable error
    short = ", ".join(repr(v) for v in sample.gold.values[:-1])
    store2 = fresh([sample])
    record2 = analyzer_pass(store2, sample, ScriptedResponder(wrap(short)))
    assert record2.stage is Stage.PENDING
    assert record2.mae is None


def test_transport_failure_noted_then_cleared(tasks):
    sample = tasks[TaskKind.DECISION][0]
    store = fresh([sample])
    down = DownResponder()
    record = analyzer_pass(store, sample, down)
    assert down.calls == 1
    assert record.stage is Stage.PENDING
    assert "unreachable" in record.error_note

    record = analyzer_pass(store, sample, GoldResponder([sample]))
    assert record.stage is Stage.STEP1_SOLVED
    assert record.error_note is None


def test_analyzer_requires_registration(tasks):
    sample = tasks[TaskKind.SCENARIO][0]
    store = AnnotationStore()
    with pytest.raises(ValueError):
        analyzer_pass(store, sample, GoldResponder([sample]))


def test_analyzer_skips_resolved_samples(tasks):
    sample = tasks[TaskKind.SCENARIO][1]
    store = fresh([sample])
    analyzer_pass(store, sample, GoldResponder([sample]))
    events_before = len(store.events)
    record = analyzer_pass(store, sample, WrongAnswers([sample]))
    assert record.stage is Stage.STEP1_SOLVED
    assert len(store.events) == events_before


def test_analyzer_stage_counts(tasks):
    samples = (
        tasks[TaskKind.SCENARIO][:2] + tasks[TaskKind.CAUSALITY][:1] + tasks[TaskKind.FORECAST][:2]
    )
    store = AnnotationStore()
    moved = run_analyzer_stage(store, samples, WrongAnswers(samples))
    assert moved == {"step1_solved": 0, "review_queued": 3, "pending": 2}
    # second run only touches what is still pending
    moved = run_analyzer_stage(store, samples, GoldResponder(samples))
    assert moved == {"step1_solved": 2, "review_queued": 0, "pending": 0}


# -- review leasing ---------------------------------------------------------------


def queue_all(samples, now=0.0):
    store = fresh(samples)
    wrong = WrongAnswers(samples)
    for sample in samples:
        analyzer_pass(store, sample, wrong, now=now)
    return store


def test_next_review_hands_out_oldest_first(tasks):
    samples = tasks[TaskKind.SCENARIO][:3]
    store = queue_all(samples)
    first = next_review(store, "amy", now=10.0)
    assert first.sample_id == samples[0].id
    assert first.lease == ("amy", 10.0)


def test_concurrent_reviewers_get_distinct_samples(tasks):
    samples = tasks[TaskKind.SCENARIO][:3]
    store = queue_all(samples)
    a = next_review(store, "amy", now=0.0)
    b = next_review(store, "bob", now=1.0)
    assert a.sample_id != b.sample_id
    # re-asking refreshes your own lease instead of skipping the sample
    again = next_review(store, "amy", now=2.0)
    assert again.sample_id == a.sample_id
    assert again.lease == ("amy", 2.0)


def test_expired_lease_is_stolen(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0, lease_seconds=100.0)
    stolen = next_review(store, "bob", now=101.0, lease_seconds=100.0)
    assert stolen.sample_id == samples[0].id
    assert stolen.lease[0] == "bob"


def test_next_review_rejects_blank_reviewer(tasks):
    store = queue_all(tasks[TaskKind.SCENARIO][:1])
    with pytest.raises(ValueError):
        next_review(store, "", now=0.0)


def test_next_review_empty_queue_returns_none(tasks):
    store = fresh(tasks[TaskKind.SCENARIO][:1])
    assert next_review(store, "amy", now=0.0) is None


def test_lease_event_requires_queued_stage(tasks):
    sample = tasks[TaskKind.SCENARIO][0]
    store = fresh([sample])
    with pytest.raises(TransitionError):
        store.append({"type": "leased", "sample_id": sample.id, "reviewer": "amy", "at": 0.0})


# -- verdict submission -----------------------------------------------------------


def test_sufficient_verdict_solves(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0)
    verdict = HumanVerdict(True, "range check rules the rest out.", "amy")
    record = submit_review(store, samples[0].id, verdict, now=5.0)
    assert record.stage is Stage.HUMAN_SOLVED
    assert record.human_verdict == verdict
    assert record.lease is None


def test_insufficient_verdict_rejects_without_reasoning(tasks):
    samples = tasks[TaskKind.CAUSALITY][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0)
    record = submit_review(store, samples[0].id, HumanVerdict(False, "", "amy"), now=1.0)
    assert record.stage is Stage.REJECTED


def test_sufficient_verdict_requires_reasoning(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0)
    with pytest.raises(ValueError):
        submit_review(store, samples[0].id, HumanVerdict(True, "   ", "amy"), now=1.0)


def test_submit_unknown_sample_raises_keyerror(tasks):
    store = queue_all(tasks[TaskKind.SCENARIO][:1])
    with pytest.raises(KeyError):
        submit_review(store, "ghost", HumanVerdict(False, "", "amy"), now=0.0)


def test_double_submit_conflicts(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0)
    submit_review(store, samples[0].id, HumanVerdict(True, "fits the card.", "amy"), now=1.0)
    with pytest.raises(ConflictError):
        submit_review(store, samples[0].id, HumanVerdict(False, "", "amy"), now=2.0)


def test_submit_without_lease_conflicts(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    with pytest.raises(ConflictError):
        submit_review(store, samples[0].id, HumanVerdict(True, "ok.", "amy"), now=0.0)


def test_submit_under_foreign_lease_conflicts(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0)
    with pytest.raises(ConflictError):
        submit_review(store, samples[0].id, HumanVerdict(True, "ok.", "bob"), now=1.0)


def test_submit_after_lease_expiry_conflicts(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    next_review(store, "amy", now=0.0, lease_seconds=100.0)
    with pytest.raises(ConflictError):
        submit_review(
            store, samples[0].id, HumanVerdict(True, "ok.", "amy"), now=200.0, lease_seconds=100.0
        )


# -- rewriting --------------------------------------------------------------------


def human_solve(store, sample, reasoning="length gate leaves one option."):
    next_review(store, "amy", now=0.0)
    return submit_review(store, sample.id, HumanVerdict(True, reasoning, "amy"), now=1.0)


def test_preserving_rewrite_promotes(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    human_solve(store, samples[0])
    record = rewriter_pass(store, samples[0], GoldRewriter(samples))
    assert record.stage is Stage.REWRITTEN
    assert record.polished_cot is not None
    assert not record.drift_flag
    parsed = parse_response(record.polished_cot, samples[0].task, set(samples[0].option_letters))
    assert parsed.extracted == samples[0].gold


def test_drifting_rewrite_flags_and_keeps_stage(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    human_solve(store, samples[0])
    record = rewriter_pass(store, samples[0], WrongAnswers(samples))
    assert record.stage is Stage.HUMAN_SOLVED
    assert record.drift_flag
    assert record.polished_cot is None
    # a later faithful rewrite still lands and clears the flag
    record = rewriter_pass(store, samples[0], GoldRewriter(samples))
    assert record.stage is Stage.REWRITTEN
    assert not record.drift_flag


def test_rewriter_transport_failure_changes_nothing(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = queue_all(samples)
    human_solve(store, samples[0])
    events_before = len(store.events)
    record = rewriter_pass(store, samples[0], DownResponder())
    assert record.stage is Stage.HUMAN_SOLVED
    assert len(store.events) == events_before


def test_rewriter_requires_human_solved(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    store = fresh(samples)
    with pytest.raises(ValueError):
        rewriter_pass(store, samples[0], GoldRewriter(samples))


def test_rewriter_stage_counts(tasks):
    samples = tasks[TaskKind.SCENARIO][:2]
    store = queue_all(samples)
    for sample in samples:
        next_review(store, "amy", now=0.0)
        submit_review(store, sample.id, HumanVerdict(True, "checked by hand.", "amy"), now=1.0)
    moved = run_rewriter_stage(store, samples, WrongAnswers(samples))
    assert moved == {"rewritten": 0, "drifted": 2}
    moved = run_rewriter_stage(store, samples, GoldRewriter(samples))
    assert moved == {"rewritten": 2, "drifted": 0}


# -- curation ---------------------------------------------------------------------


def test_curation_promotes_lowest_error_first(tasks):
    samples = tasks[TaskKind.FORECAST][:3]
    deltas = {samples[0].id: 3.0, samples[1].id: 0.5, samples[2].id: 1.5}
    store = fresh(samples)
    analyzer = OffsetAnalyzer(samples, deltas)
    for sample in samples:
        analyzer_pass(store, sample, analyzer)

    selected, under = curate_task3(store, budget=2)
    assert selected == [samples[1].id, samples[2].id]
    assert not under
    assert store.get(samples[1].id).stage is Stage.TASK3_CURATED
    assert store.get(samples[0].id).stage is Stage.PENDING


def test_curation_tie_breaks_by_sample_id(tasks):
    samples = tasks[TaskKind.FORECAST][:2]
    store = fresh(samples)
    analyzer = OffsetAnalyzer(samples, {s.id: 1.0 for s in samples})
    for sample in samples:
        analyzer_pass(store, sample, analyzer)
    selected, under = curate_task3(store, budget=1)
    assert selected == [min(s.id for s in samples)]
    assert not under


def test_curation_reports_short_pool_and_skips_unscored(tasks):
    samples = tasks[TaskKind.FORECAST][:2]
    store = fresh(samples)
    analyzer_pass(store, samples[0], OffsetAnalyzer(samples, {samples[0].id: 2.0}))
    analyzer_pass(store, samples[1], ScriptedResponder(wrap("not numbers")))

    selected, under = curate_task3(store, budget=5)
    assert selected == [samples[0].id]
    assert under
    assert store.get(samples[1].id).stage is Stage.PENDING


# -- exports ----------------------------------------------------------------------


@pytest.fixture()
def worked_store(tasks):
    """One sample per terminal stage: solved, rewritten, curated, rejected,
    plus an untouched pending forecast."""
    solved = tasks[TaskKind.CAUSALITY][0]
    rewritten = tasks[TaskKind.SCENARIO][0]
    rejected = tasks[TaskKind.SCENARIO][1]
    curated = tasks[TaskKind.FORECAST][0]
    pending = tasks[TaskKind.FORECAST][1]
    samples = [solved, rewritten, rejected, curated, pending]
    store = fresh(samples)

    analyzer_pass(store, solved, GoldResponder([solved]))
    analyzer_pass(store, rewritten, WrongAnswers([rewritten]))
    analyzer_pass(store, rejected, WrongAnswers([rejected]))
    analyzer_pass(store, curated, OffsetAnalyzer([curated], {curated.id: 0.25}))

    next_review(store, "amy", now=0.0)
    submit_review(store, rewritten.id, HumanVerdict(True, "event timing fits.", "amy"), now=1.0)
    next_review(store, "amy", now=2.0)
    submit_review(store, rejected.id, HumanVerdict(False, "", "amy"), now=3.0)
    rewriter_pass(store, rewritten, GoldRewriter([rewritten]))
    curate_task3(store, budget=1)
    return store, samples


def test_stage1_exports_reasoning_bearing_samples(worked_store):
    store, samples = worked_store
    solved, rewritten, rejected, curated, pending = samples
    exported = {s.id: s for s in export_stage(store, samples, "stage1")}

    assert set(exported) == {solved.id, rewritten.id, curated.id}
    assert exported[solved.id].cot == store.get(solved.id).analyzer_output
    assert exported[rewritten.id].cot == store.get(rewritten.id).polished_cot
    assert exported[curated.id].cot == store.get(curated.id).analyzer_output


def test_stage1_curated_gold_is_the_analyzer_sequence(worked_store):
    store, samples = worked_store
    curated = samples[3]
    exported = {s.id: s for s in export_stage(store, samples, "stage1")}
    out = exported[curated.id]

    assert isinstance(out.gold, SequenceAnswer)
    assert out.gold != curated.gold
    assert mae(out.gold.values, curated.gold.values) == pytest.approx(0.25, abs=1e-9)
    # and the exported cot re-grades perfectly against the exported label
    graded = score_sample(out, out.cot)
    assert graded.valid
    assert graded.abs_error == pytest.approx(0.0, abs=1e-12)


def test_every_stage1_cot_regrades_to_its_gold(worked_store):
    store, samples = worked_store
    for out in export_stage(store, samples, "stage1"):
        graded = score_sample(out, out.cot)
        assert graded.reward_format == 1
        if out.task.is_discrete:
            assert graded.correct
        else:
            assert graded.abs_error == pytest.approx(0.0, abs=1e-12)


def test_stage2_exports_labels_only_and_drops_rejected(worked_store):
    store, samples = worked_store
    rejected = samples[2]
    exported = export_stage(store, samples, "stage2")
    ids = {s.id for s in exported}
    assert rejected.id not in ids
    assert ids == {s.id for s in samples} - {rejected.id}
    assert all(s.cot is None for s in exported)


def test_rejected_never_exports(worked_store):
    store, samples = worked_store
    rejected = samples[2]
    for stage_name in ("stage1", "stage2"):
        assert rejected.id not in {s.id for s in export_stage(store, samples, stage_name)}


def test_export_skips_unregistered_and_rejects_unknown_stage(tasks, worked_store):
    store, samples = worked_store
    stranger = tasks[TaskKind.DECISION][0]
    exported = export_stage(store, samples + [stranger], "stage2")
    assert stranger.id not in {s.id for s in exported}
    with pytest.raises(ValueError):
        export_stage(store, samples, "stage3")


# -- review service ---------------------------------------------------------------


def make_service(dataset, *, analyzer=None, rewriter=None, config=None, start=1_000.0):
    clock = {"t": start}
    store = AnnotationStore()
    app = create_app(
        store,
        dataset,
        analyzer=analyzer,
        rewriter=rewriter,
        config=config,
        clock=lambda: clock["t"],
    )
    return TestClient(app), store, clock


def test_service_registers_dataset_on_startup(tasks):
    samples = tasks[TaskKind.SCENARIO][:2]
    client, store, _ = make_service(samples)
    stats = client.get("/queue/stats").json()
    assert stats["total"] == 2
    assert stats["stages"]["pending"] == 2
    assert stats["stage1_exportable"] == 0
    assert stats["stage2_exportable"] == 2


def test_service_analyzer_run_then_review_flow(tasks):
    samples = tasks[TaskKind.SCENARIO][:2]
    client, store, clock = make_service(
        samples, analyzer=WrongAnswers(samples), config=ServiceConfig(lease_seconds=60.0)
    )
    run = client.post("/pipeline/run", json={"stage": "analyzer"})
    assert run.status_code == 200
    assert run.json()["moved"] == {"step1_solved": 0, "review_queued": 2, "pending": 0}

    nxt = client.get("/review/next", params={"reviewer": "amy"})
    assert nxt.status_code == 200
    payload = nxt.json()
    sample = next(s for s in samples if s.id == payload["sample_id"])
    assert payload["task"] == sample.task.value
    assert payload["context"] == sample.context
    assert payload["options"] == [{"letter": l, "text": t} for l, t in sample.options]
    assert payload["gold"] == sample.gold.letter
    assert payload["series"][0]["values"] == list(sample.series[0].values)
    assert payload["analyzer_attempt"] == store.get(sample.id).analyzer_output
    assert payload["leased_until"] == clock["t"] + 60.0

    done = client.post(
        f"/review/{payload['sample_id']}",
        json={"reviewer": "amy", "sufficient": True, "reasoning": "pattern tags match."},
    )
    assert done.status_code == 200
    body = done.json()
    assert body["stage"] == "human_solved"
    assert body["human_verdict"]["reasoning"] == "pattern tags match."


def test_service_hides_attempt_when_configured(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    client, _, _ = make_service(
        samples,
        analyzer=WrongAnswers(samples),
        config=ServiceConfig(show_analyzer_attempt=False),
    )
    client.post("/pipeline/run", json={"stage": "analyzer"})
    payload = client.get("/review/next", params={"reviewer": "amy"}).json()
    assert payload["analyzer_attempt"] is None


def test_service_reviewer_param_is_mandatory(tasks):
    client, _, _ = make_service(tasks[TaskKind.SCENARIO][:1])
    assert client.get("/review/next").status_code == 422
    assert client.get("/review/next", params={"reviewer": ""}).status_code == 422


def test_service_empty_queue_404(tasks):
    client, _, _ = make_service(tasks[TaskKind.SCENARIO][:1])
    response = client.get("/review/next", params={"reviewer": "amy"})
    assert response.status_code == 404


def test_service_lease_expiry_steal_and_stale_submit(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    client, _, clock = make_service(
        samples, analyzer=WrongAnswers(samples), config=ServiceConfig(lease_seconds=10.0)
    )
    client.post("/pipeline/run", json={"stage": "analyzer"})
    first = client.get("/review/next", params={"reviewer": "amy"}).json()

    clock["t"] += 11.0
    second = client.get("/review/next", params={"reviewer": "bob"}).json()
    assert second["sample_id"] == first["sample_id"]

    stale = client.post(
        f"/review/{first['sample_id']}",
        json={"reviewer": "amy", "sufficient": True, "reasoning": "too late."},
    )
    assert stale.status_code == 409

    fresh_submit = client.post(
        f"/review/{first['sample_id']}",
        json={"reviewer": "bob", "sufficient": False, "reasoning": ""},
    )
    assert fresh_submit.status_code == 200
    assert fresh_submit.json()["stage"] == "rejected"


def test_service_submit_error_codes(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    client, _, _ = make_service(samples, analyzer=WrongAnswers(samples))
    client.post("/pipeline/run", json={"stage": "analyzer"})
    client.get("/review/next", params={"reviewer": "amy"})

    missing = client.post(
        "/review/ghost", json={"reviewer": "amy", "sufficient": False, "reasoning": ""}
    )
    assert missing.status_code == 404
    bad = client.post(
        f"/review/{samples[0].id}",
        json={"reviewer": "amy", "sufficient": True, "reasoning": ""},
    )
    assert bad.status_code == 400


def test_service_pipeline_stage_validation(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    client, _, _ = make_service(samples)
    assert client.post("/pipeline/run", json={"stage": "analyzer"}).status_code == 400
    assert client.post("/pipeline/run", json={"stage": "rewriter"}).status_code == 400
    assert client.post("/pipeline/run", json={"stage": "mystery"}).status_code == 400


def test_service_stage1_export_carries_reviewer_reasoning(tasks):
    samples = tasks[TaskKind.SCENARIO][:1]
    client, _, _ = make_service(
        samples, analyzer=WrongAnswers(samples), rewriter=DraftRewriter(samples)
    )
    client.post("/pipeline/run", json={"stage": "analyzer"})
    queued = client.get("/review/next", params={"reviewer": "amy"}).json()
    reasoning = "the 62-point span and evening peaks rule out everything but this option."
    client.post(
        f"/review/{queued['sample_id']}",
        json={"reviewer": "amy", "sufficient": True, "reasoning": reasoning},
    )
    client.post("/pipeline/run", json={"stage": "rewriter"})

    lines = [line for line in client.get("/export/stage1").text.splitlines() if line]
    assert len(lines) == 1
    exported = canonical_decode(lines[0])
    assert reasoning in exported.cot
    assert score_sample(exported, exported.cot).correct


def test_service_full_pipeline_and_exports(tasks):
    samples = [
        tasks[TaskKind.CAUSALITY][0],
        tasks[TaskKind.SCENARIO][0],
        tasks[TaskKind.FORECAST][0],
    ]

    class MixedAnalyzer:
        """Right on causality, wrong letter on scenarios, near-miss forecasts."""

        name = "mixed"

        def __init__(self, dataset):
            self._gold = GoldResponder([s for s in dataset if s.task is TaskKind.CAUSALITY])
            self._wrong = WrongAnswers([s for s in dataset if s.task is not TaskKind.CAUSALITY])

        def respond(self, system, user):
            try:
                return self._gold.respond(system, user)
            except TransportError:
                return self._wrong.respond(system, user)

    client, store, clock = make_service(
        samples, analyzer=MixedAnalyzer(samples), rewriter=GoldRewriter(samples)
    )
    moved = client.post("/pipeline/run", json={"stage": "analyzer"}).json()["moved"]
    assert moved == {"step1_solved": 1, "review_queued": 1, "pending": 1}

    queued = client.get("/review/next", params={"reviewer": "amy"}).json()
    client.post(
        f"/review/{queued['sample_id']}",
        json={"reviewer": "amy", "sufficient": True, "reasoning": "gates converge."},
    )
    rewrite = client.post("/pipeline/run", json={"stage": "rewriter"}).json()
    assert rewrite["moved"] == {"rewritten": 1, "drifted": 0}

    curated = client.post("/pipeline/run", json={"stage": "curate", "budget": 5}).json()
    assert curated == {"stage": "curate", "selected": 1, "under_budget": True}

    stats = client.get("/queue/stats").json()
    assert stats["stage1_exportable"] == 3
    assert stats["stage2_exportable"] == 3

    response = client.get("/export/stage1")
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/x-ndjson")
    lines = [line for line in response.text.splitlines() if line]
    decoded = [canonical_decode(line) for line in lines]
    assert {s.id for s in decoded} == {s.id for s in samples}
    for out in decoded:
        assert out.cot
        graded = score_sample(out, out.cot)
        assert graded.correct if out.task.is_discrete else graded.abs_error == 0.0

    assert client.get("/export/stage3").status_code == 404
