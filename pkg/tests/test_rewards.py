import math

import numpy as np
import pytest

from tsreason.core import Choice, SequenceAnswer, TaskKind
from tsreason.parsing import parse_response
from tsreason.rewards import (
    DEFAULT_ALPHA,
    GrpoConfig,
    RolloutGroup,
    discrete_reward,
    format_reward,
    grpo_objective,
    group_advantages,
    mae,
    score_response,
    sequence_reward,
    sft_nll,
    total_reward,
)


def test_total_reward_golden_values():
    assert total_reward(1, 1, 0.1).total == pytest.approx(1.0, abs=1e-12)
    assert total_reward(1, 0, 0.1).total == pytest.approx(0.1, abs=1e-12)
    assert total_reward(0, 1, 0.1).total == pytest.approx(0.9, abs=1e-12)


def test_sequence_exact_match_earns_length_bonus():
    gold = (3.0, 4.5, 6.0)
    r = sequence_reward(gold, gold)
    assert r == pytest.approx(1.1, abs=1e-12)
    assert total_reward(1, r, 0.1).total == pytest.approx(1.09, abs=1e-12)


def test_sequence_length_mismatch_is_zero():
    assert sequence_reward((1.0, 2.0), (1.0, 2.0, 3.0)) == 0.0


def test_sequence_reward_decays_with_known_error():
    # mae([1,2,3],[2,2,5]) = (1+0+2)/3 = 1.0, worked by hand
    pred, gold = (1.0, 2.0, 3.0), (2.0, 2.0, 5.0)
    assert mae(pred, gold) == pytest.approx(1.0)
    assert sequence_reward(pred, gold) == pytest.approx(math.exp(-DEFAULT_ALPHA * 1.0) + 0.1)


def test_sequence_reward_scale_divides_error():
    pred, gold = (10.0,), (20.0,)
    unscaled = sequence_reward(pred, gold, alpha=0.05)
    scaled = sequence_reward(pred, gold, alpha=0.05, scale=10.0)
    assert unscaled == pytest.approx(math.exp(-0.5) + 0.1)
    assert scaled == pytest.approx(math.exp(-0.05) + 0.1)


def test_sequence_reward_monotone_in_error():
    rng = np.random.default_rng(5)
    gold = tuple(rng.uniform(0, 50, 24))
    last = None
    for shift in (0.0, 0.5, 2.0, 10.0, 80.0):
        r = sequence_reward(tuple(g + shift for g in gold), gold)
        if last is not None:
            assert r < last
        last = r


def test_mae_input_validation():
    with pytest.raises(ValueError):
        mae((1.0,), (1.0, 2.0))
    with pytest.raises(ValueError):
        mae((), ())


def test_reward_parameter_validation():
    with pytest.raises(ValueError):
        total_reward(1, 1, lambda_=1.5)
    with pytest.raises(ValueError):
        sequence_reward((1.0,), (1.0,), alpha=0.0)
    with pytest.raises(ValueError):
        sequence_reward((1.0,), (1.0,), scale=-1.0)
    with pytest.raises(ValueError):
        GrpoConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        GrpoConfig(beta=-0.1)


def test_discrete_and_format_rewards():
    assert discrete_reward("B", "B") == 1
    assert discrete_reward("A", "B") == 0
    good = parse_response("<think>.</think><answer>A</answer>", TaskKind.SCENARIO)
    bad = parse_response("<answer>A</answer>", TaskKind.SCENARIO)
    assert format_reward(good) == 1
    assert format_reward(bad) == 0


def test_group_advantages_hand_case():
    # mean of [1,1,0,0,0,0,0,0] is 0.25
    adv = group_advantages(RolloutGroup((1, 1, 0, 0, 0, 0, 0, 0)))
    assert adv[:2] == pytest.approx([0.75, 0.75])
    assert adv[2:] == pytest.approx([-0.25] * 6)


def test_group_advantages_sum_to_zero():
    rng = np.random.default_rng(11)
    for _ in range(200):
        rewards = tuple(rng.uniform(0, 1.09, 8))
        assert abs(sum(group_advantages(RolloutGroup(rewards)))) < 1e-9


def test_identical_rewards_give_zero_advantages():
    assert group_advantages(RolloutGroup((0.7,) * 8)) == pytest.approx([0.0] * 8)


def test_empty_group_rejected():
    with pytest.raises(ValueError):
        RolloutGroup(())


def test_grpo_objective_zero_at_reference():
    cfg = GrpoConfig()
    lp = [-4.0, -2.0, -9.0, -1.0]
    assert grpo_objective(lp, lp, [0.5, -0.5, 0.25, -0.25], [0.0] * 4, cfg) == pytest.approx(0.0)


def test_grpo_clip_branches_hand_enumerated():
    cfg = GrpoConfig(epsilon=0.2, beta=0.0)
    ln2 = math.log(2.0)
    # rho=2, A=+1: min(2*1, 1.2*1) = 1.2 (clip active)
    assert grpo_objective([ln2], [0.0], [1.0], [0.0], cfg) == pytest.approx(1.2)
    # rho=2, A=-1: min(-2, -1.2) = -2 (unclipped branch wins the min)
    assert grpo_objective([ln2], [0.0], [-1.0], [0.0], cfg) == pytest.approx(-2.0)
    ln_half = math.log(0.5)
    # rho=0.5, A=+1: min(0.5, 0.8) = 0.5
    assert grpo_objective([ln_half], [0.0], [1.0], [0.0], cfg) == pytest.approx(0.5)
    # rho=0.5, A=-1: min(-0.5, -0.8) = -0.8 (clip active)
    assert grpo_objective([ln_half], [0.0], [-1.0], [0.0], cfg) == pytest.approx(-0.8)


def test_grpo_kl_penalty_subtracts():
    cfg = GrpoConfig(epsilon=0.2, beta=0.04)
    base = grpo_objective([0.0], [0.0], [1.0], [0.0], cfg)
    with_kl = grpo_objective([0.0], [0.0], [1.0], [2.0], cfg)
    assert base - with_kl == pytest.approx(0.04 * 2.0)


def test_grpo_unclipped_when_ratios_inside_radius():
    cfg = GrpoConfig(epsilon=0.2, beta=0.01)
    rng = np.random.default_rng(3)
    for _ in range(50):
        ref = rng.uniform(-5, -1, 6)
        # keep |rho - 1| <= eps by bounding the logprob gap
        gap = rng.uniform(math.log(0.85), math.log(1.15), 6)
        pol = ref + gap
        adv = rng.uniform(-1, 1, 6)
        kl = rng.uniform(0, 0.5, 6)
        expected = float(np.mean(np.exp(gap) * adv - cfg.beta * kl))
        got = grpo_objective(list(pol), list(ref), list(adv), list(kl), cfg)
        assert got == pytest.approx(expected, abs=1e-12)


def test_grpo_objective_input_validation():
    cfg = GrpoConfig()
    with pytest.raises(ValueError):
        grpo_objective([], [], [], [], cfg)
    with pytest.raises(ValueError):
        grpo_objective([0.0], [0.0, 1.0], [0.0], [0.0], cfg)
    with pytest.raises(ValueError):
        grpo_objective([float("nan")], [0.0], [0.0], [0.0], cfg)


def test_score_response_choice_paths():
    gold = Choice("B")
    right = parse_response("<think>.</think><answer>B</answer>", TaskKind.SCENARIO)
    wrong = parse_response("<think>.</think><answer>A</answer>", TaskKind.SCENARIO)
    broken = parse_response("<think>.</think><answer>?</answer>", TaskKind.SCENARIO)
    assert score_response(right, gold).total == pytest.approx(1.0)
    assert score_response(wrong, gold).total == pytest.approx(0.1)
    assert score_response(broken, gold).total == pytest.approx(0.1)  # format only


def test_score_response_sequence_path():
    gold = SequenceAnswer((2.0, 4.0))
    exact = parse_response("<think>.</think><answer>2, 4</answer>", TaskKind.FORECAST)
    short = parse_response("<think>.</think><answer>2</answer>", TaskKind.FORECAST)
    assert score_response(exact, gold).total == pytest.approx(1.09)
    assert score_response(short, gold).task == 0.0


def test_sft_nll_hand_case():
    # sample sums: -( -1-2 ) = 3 and -(-3) = 3, mean 3
    assert sft_nll([[-1.0, -2.0], [-3.0]]) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        sft_nll([])
    with pytest.raises(ValueError):
        sft_nll([[]])
