"""Event-driven network simulation: config, determinism, attacks, Monte Carlo."""

import json
from dataclasses import replace

import pytest

from scorechain.analysis import SafetyParams
from scorechain.core_types import ChainConfig, TxModel
from scorechain.incentive import RewardSchedule
from scorechain.simnet import (
    LatencySpec,
    SIM_WITNESS_THRESHOLD,
    SimConfig,
    SimConfigError,
    Strategy,
    run_miss_model,
    run_simulation,
    run_trials,
    witness_corruption_trials,
    write_trials_csv,
)

SMALL = SimConfig(n_nodes=10, duration=80, tx_rate=1.0, seed=5)


# -- configuration -----------------------------------------------------------------


def test_validation_names_the_offending_key():
    cases = [
        (SimConfig(n_nodes=1), "n_nodes"),
        (SimConfig(adversary_fraction=1.5), "adversary_fraction"),
        (SimConfig(delivery_ratio=0.0), "delivery_ratio"),
        (SimConfig(duration=0), "duration"),
        (SimConfig(tx_rate=-0.5), "tx_rate"),
        (SimConfig(fork_win_extra=-1), "fork_win_extra"),
        (SimConfig(slot_spacing=0), "slot_spacing"),
        (SimConfig(proposal_timeout=0), "proposal_timeout"),
        (SimConfig(scheme="rsa"), "scheme"),
        (SimConfig(latency=LatencySpec("uniform", 5, 2)), "latency"),
    ]
    for cfg, key in cases:
        with pytest.raises(SimConfigError) as err:
            cfg.validate()
        assert err.value.key == key
        assert key in str(err.value)


def test_config_dict_round_trip():
    cfg = SimConfig(
        n_nodes=9,
        adversary_fraction=0.25,
        delivery_ratio=0.8,
        latency=LatencySpec.uniform(2, 5),
        chain=ChainConfig(tx_count_min=3, witness_m=3, confirm_depth=4),
        tx_rate=2.5,
        duration=50,
        seed=99,
        adversary_strategy=Strategy.DOUBLE_SPEND,
        tx_model=TxModel.UTXO,
        rewards=RewardSchedule(50, 5),
        fork_win_extra=2,
    )
    data = json.loads(json.dumps(cfg.to_dict()))  # survive a real JSON trip
    assert SimConfig.from_dict(data) == cfg
    assert data["chain"]["witness_threshold"] == f"{cfg.chain.witness_threshold:x}"


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(SimConfigError) as err:
        SimConfig.from_dict({"bogus_key": 1})
    assert err.value.key == "bogus_key"


def test_from_dict_fills_sim_threshold_when_missing():
    cfg = SimConfig.from_dict({"chain": {"witness_m": 3}})
    assert cfg.chain.witness_threshold == SIM_WITNESS_THRESHOLD
    assert cfg.chain.witness_m == 3
    explicit = SimConfig.from_dict({"chain": {"witness_threshold": "ff"}})
    assert explicit.chain.witness_threshold == 255


def test_from_dict_parse_errors_name_their_section():
    with pytest.raises(SimConfigError) as err:
        SimConfig.from_dict({"adversary_strategy": "griefing"})
    assert err.value.key == "adversary_strategy"
    with pytest.raises(SimConfigError) as err:
        SimConfig.from_dict({"tx_model": "banknotes"})
    assert err.value.key == "tx_model"
    with pytest.raises(SimConfigError) as err:
        SimConfig.from_dict({"rewards": {"proposer_reward": -1}})
    assert err.value.key == "rewards"


def test_latency_spec_sampling():
    import random

    rng = random.Random(0)
    fixed = LatencySpec.fixed(4)
    assert {fixed.sample(rng) for _ in range(20)} == {4}
    ranged = LatencySpec.uniform(2, 5)
    draws = {ranged.sample(rng) for _ in range(200)}
    assert draws == {2, 3, 4, 5}
    assert LatencySpec.from_dict(fixed.to_dict()) == fixed
    assert LatencySpec.from_dict(ranged.to_dict()) == ranged
    with pytest.raises(SimConfigError):
        LatencySpec("random", 1, 1).validate()


# -- determinism ---------------------------------------------------------------------


def test_same_seed_same_report():
    cfg = replace(SMALL, n_nodes=12, duration=100, seed=7)
    first = run_simulation(cfg)
    second = run_simulation(cfg)
    assert first.to_json() == second.to_json()
    other = run_simulation(replace(cfg, seed=8))
    assert other.per_node_head != first.per_node_head


def test_report_echoes_config_and_serializes():
    report = run_simulation(SMALL)
    assert report.config == SMALL.to_dict()
    payload = json.loads(report.to_json())
    assert payload["seed"] == SMALL.seed
    assert payload["blocks_minted"] == report.blocks_minted
    assert "trace" in payload and payload["trace"] == []


def test_trace_records_deliveries():
    report = run_simulation(replace(SMALL, n_nodes=6, duration=30, trace=True))
    assert report.trace
    kinds = {ev.kind for ev in report.trace}
    assert "TxGossip" in kinds


# -- healthy runs ------------------------------------------------------------------------


def test_default_run_converges_cleanly():
    report = run_simulation(SimConfig())
    assert report.honest_nodes == 20
    assert report.blocks_minted > 10
    assert report.txs_confirmed > 50
    assert report.hard_forks == 0
    assert report.misled_events == 0
    assert report.confirmed_conflict_nodes == 0
    assert report.prefix_agreement
    assert 0 < report.min_confirmed_height <= report.max_height
    assert len(report.per_node_head) == 20


def test_fork_win_traffic_matches_switch_count():
    base = run_simulation(SimConfig(seed=3))
    assert base.switches > 0  # lossy uniform latency forces real races
    assert base.fork_win_msgs == base.switches
    extra = run_simulation(SimConfig(seed=3, fork_win_extra=2))
    assert extra.switches > 0
    assert extra.fork_win_msgs == 3 * extra.switches


def test_utxo_model_runs_clean():
    report = run_simulation(replace(SMALL, tx_model=TxModel.UTXO))
    assert report.blocks_minted > 0
    assert report.txs_confirmed > 0
    assert report.confirmed_conflict_nodes == 0
    assert report.prefix_agreement


def test_rewards_flow_through_mint_and_validation():
    report = run_simulation(replace(SMALL, rewards=RewardSchedule(50, 5)))
    assert report.blocks_minted > 0
    assert report.txs_confirmed > 0
    assert report.confirmed_conflict_nodes == 0


def test_ed25519_scheme_end_to_end():
    report = run_simulation(
        replace(SMALL, n_nodes=6, duration=30, scheme="ed25519", seed=2)
    )
    assert report.blocks_minted > 0
    assert report.confirmed_conflict_nodes == 0


def test_replay_checked_run_stays_consistent():
    report = run_simulation(replace(SMALL, replay_check=True, seed=13))
    assert report.blocks_minted > 0  # every switch re-verified against replay


# -- adversary strategies --------------------------------------------------------------------


def test_double_spend_never_splits_confirmations():
    for model in (TxModel.ACCOUNT, TxModel.UTXO):
        report = run_simulation(
            replace(
                SMALL,
                n_nodes=12,
                adversary_fraction=0.25,
                adversary_strategy=Strategy.DOUBLE_SPEND,
                tx_model=model,
                seed=21,
            )
        )
        assert report.blocks_minted > 0
        assert report.confirmed_conflict_nodes == 0
        assert report.prefix_agreement


def test_equivocating_proposers_cannot_corrupt_prefixes():
    report = run_simulation(
        replace(
            SMALL,
            n_nodes=12,
            adversary_fraction=0.25,
            adversary_strategy=Strategy.EQUIVOCATE,
            seed=22,
        )
    )
    assert report.blocks_minted > 0
    assert report.confirmed_conflict_nodes == 0
    assert report.prefix_agreement


def test_invalid_blocks_never_reach_honest_prefixes():
    report = run_simulation(
        replace(
            SMALL,
            n_nodes=12,
            adversary_fraction=0.25,
            adversary_strategy=Strategy.INVALID_BLOCK_PUSH,
            seed=23,
        )
    )
    assert report.blocks_minted > 0
    assert report.confirmed_conflict_nodes == 0
    assert report.misled_events == 0
    assert report.prefix_agreement


# -- trial batches -----------------------------------------------------------------------------


def test_run_trials_aggregates_counters():
    cfg = replace(SMALL, n_nodes=8, duration=60)
    result = run_trials(cfg, trials=4)
    assert result.trials == 4
    assert [row["seed"] for row in result.rows] == [5, 6, 7, 8]
    for name in ("blocks_minted", "switches", "hard_forks"):
        assert result.totals[name] == sum(row[name] for row in result.rows)
        assert result.means[name] == result.totals[name] / 4
        assert result.mins[name] <= result.maxs[name]
    lo, hi = result.hard_fork_ci
    assert 0.0 <= lo <= hi <= 1.0
    assert result.honest_node_runs == 4 * 8
    assert "blocks_minted=" in result.summary_line()
    with pytest.raises(SimConfigError):
        run_trials(cfg, trials=0)


def test_parallel_trials_match_serial():
    cfg = replace(SMALL, n_nodes=8, duration=60)
    serial = run_trials(cfg, trials=4, jobs=1)
    parallel = run_trials(cfg, trials=4, jobs=2)
    assert parallel.rows == serial.rows
    assert parallel.totals == serial.totals


def test_trials_csv_layout(tmp_path):
    cfg = replace(SMALL, n_nodes=8, duration=60)
    result = run_trials(cfg, trials=3)
    path = str(tmp_path / "trials.csv")
    write_trials_csv(result, path)
    lines = open(path).read().splitlines()
    assert lines[0].startswith("seed,misled_events,hard_forks,")
    assert len(lines) == 4
    assert lines[1].split(",")[0] == "5"


# -- miss-model Monte Carlo ----------------------------------------------------------------------


def test_miss_model_tracks_formula():
    params = SafetyParams(m=1, n_c=1, l=0, r=0.2)
    result = run_miss_model(params, trials=50_000, seed=3)
    assert result.exponent == 16
    assert result.trials == 50_000
    assert result.frequency == pytest.approx(0.8**16, abs=4 * 7.4e-4)  # 4 sigma


def test_miss_model_lossless_edge():
    result = run_miss_model(SafetyParams(m=2, n_c=2, r=1.0), trials=1000)
    assert result.misled == 0
    assert result.frequency == 0.0
    with pytest.raises(ValueError):
        run_miss_model(SafetyParams(m=1, n_c=1), trials=0)


# -- witness-corruption Monte Carlo ------------------------------------------------------------------


def test_corruption_edges():
    clean = witness_corruption_trials(500, q=0.0, m=2, n_keys=40, seed=1)
    assert clean.witnessed == 0
    assert clean.analytic == 0.0
    total = witness_corruption_trials(500, q=1.0, m=2, n_keys=40, seed=1)
    assert total.witnessed == 500
    assert total.adversarial_slot_rate == 1.0
    assert total.analytic == 1.0


def test_corruption_mid_q_matches_q_to_the_m():
    result = witness_corruption_trials(3000, q=0.5, m=2, n_keys=60, seed=2)
    assert result.analytic == 0.25
    assert result.witnessed_rate == pytest.approx(0.25, abs=4 * 0.0079)  # 4 sigma
    assert result.adversarial_slot_rate == pytest.approx(0.5, abs=0.03)


def test_corruption_argument_checks():
    with pytest.raises(ValueError):
        witness_corruption_trials(0, q=0.5, m=2)
    with pytest.raises(ValueError):
        witness_corruption_trials(10, q=0.5, m=0)
    with pytest.raises(ValueError):
        witness_corruption_trials(10, q=0.5, m=9, n_keys=10)
