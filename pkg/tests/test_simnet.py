import json
import math

import numpy as np
import pytest

from secaggsim.errors import TooManyDropouts
from secaggsim.masking import DH_GROUP_TEST, LweParams
from secaggsim.oracle import plaintext_aggregate
from secaggsim.protocol import STAGES, RoundConfig
from secaggsim.simnet import (
    CONTROL_STAGE,
    SimConfig,
    coalition_view,
    make_dropout_schedule,
    meter_expectations,
    metrics_match_expectations,
    run_simulation,
)

NV_STAGES = STAGES["nv"]


# --- dropout schedules -----------------------------------------------------------


def test_schedule_rate_zero_empty():
    s = make_dropout_schedule(1, 10, 0.0, "uniform", NV_STAGES)
    assert s.stages == {}


def test_schedule_thirty_percent_of_ten():
    s = make_dropout_schedule(2, 10, 0.3, "uniform", NV_STAGES)
    assert len(s.dropped) == 3
    assert all(st in NV_STAGES for st in s.stages.values())


def test_schedule_deterministic():
    a = make_dropout_schedule(3, 12, 0.25, "uniform", NV_STAGES)
    b = make_dropout_schedule(3, 12, 0.25, "uniform", NV_STAGES)
    assert a.stages == b.stages


def test_schedule_fixed_stage_policy():
    s = make_dropout_schedule(4, 10, 0.2, "aggregate_shares", NV_STAGES)
    assert set(s.stages.values()) == {"aggregate_shares"}
    with pytest.raises(ValueError):
        make_dropout_schedule(4, 10, 0.2, "no_such_stage", NV_STAGES)


def test_schedule_survivor_floor():
    with pytest.raises(TooManyDropouts):
        make_dropout_schedule(5, 10, 0.5, "uniform", NV_STAGES,
                              min_survivors=6)


# --- simulation --------------------------------------------------------------------


def test_nv_simulation_matches_oracle():
    rc = RoundConfig(protocol="nv", n=5, m=4, t=3)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=11),
                            keep_transcript=True)
    assert report.failure is None
    expected = plaintext_aggregate(report.inputs, report.result.contributors)
    assert np.max(np.abs(report.result.average - expected)) <= 2 ** -16


def test_pw_simulation_thirty_percent_dropout_completes():
    rc = RoundConfig(protocol="pw", n=10, m=4, t=6, dh=DH_GROUP_TEST,
                     planned_dropouts=3)
    sim = SimConfig(round_cfg=rc, master_seed=12, dropout_rate=0.3,
                    dropout_stage_policy="masked_vector")
    report = run_simulation(sim, keep_transcript=True)
    assert report.failure is None
    assert len(report.result.contributors) == 7
    expected = plaintext_aggregate(report.inputs, report.result.contributors)
    assert np.max(np.abs(report.result.average - expected)) <= 2 ** -16


def test_infeasible_threshold_fails_in_report():
    rc = RoundConfig(protocol="nv", n=5, m=4, t=5)
    sim = SimConfig(round_cfg=rc, master_seed=13, dropout_rate=0.3)
    report = run_simulation(sim)
    assert report.result is None
    assert report.failure.startswith("InsufficientSurvivors")


def test_multi_round_simulation():
    rc = RoundConfig(protocol="nv", n=4, m=3)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=14, rounds=3))
    assert report.failure is None
    expected = meter_expectations(rc, rounds=3)
    assert report.metrics.total_messages == expected["totals"]["messages"]


# --- metering -----------------------------------------------------------------------


@pytest.mark.parametrize("proto,kw", [
    ("nv", {}),
    ("lwe", {"lwe": LweParams(n_lwe=24, sigma=1.0, matrix_seed=b"\x0e" * 32)}),
    ("pw", {"dh": DH_GROUP_TEST}),
])
@pytest.mark.parametrize("n,m", [(3, 4), (5, 17)])
def test_measured_equals_expected_no_dropout(proto, kw, n, m):
    rc = RoundConfig(protocol=proto, n=n, m=m, **kw)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=n * 100 + m))
    assert report.failure is None
    assert metrics_match_expectations(report.metrics, meter_expectations(rc))


def test_nv_stage1_payload_formula():
    # n=5, m=4, k=2: per-client stage-1 payload is (n-1)*(2*8+16) = 128
    rc = RoundConfig(protocol="nv", n=5, m=4, t=3, k=2)
    expected = meter_expectations(rc)
    row = expected["per_stage"]["input_shares"]
    payload_per_client = (row["bytes_sent"] - 13 * row["messages_sent"]) // 5
    assert payload_per_client == 128


def test_nv_message_count_closed_form():
    for n in (3, 5, 10):
        rc = RoundConfig(protocol="nv", n=n, m=6)
        report = run_simulation(SimConfig(round_cfg=rc, master_seed=n))
        assert report.metrics.total_messages == 2 * n * (n - 1) + n


def test_lwe_share_bytes_independent_of_m():
    lwe = LweParams(n_lwe=24, sigma=1.0, matrix_seed=b"\x0f" * 32)
    sizes = []
    for m in (10, 400):
        rc = RoundConfig(protocol="lwe", n=5, m=m, lwe=lwe)
        exp = meter_expectations(rc)
        sizes.append((exp["per_stage"]["secret_shares"]["bytes_sent"],
                      exp["per_stage"]["sum_shares"]["bytes_sent"]))
    assert sizes[0] == sizes[1]


def test_conservation_under_dropout():
    rc = RoundConfig(protocol="nv", n=8, m=5, planned_dropouts=2)
    sim = SimConfig(round_cfg=rc, master_seed=15, dropout_rate=0.25)
    report = run_simulation(sim)
    assert report.metrics.conservation_holds()
    stages = report.metrics.per_stage
    assert any(row["bytes_to_dropped"] > 0 for row in stages.values())


def test_dropped_client_sends_nothing_from_its_stage_on():
    rc = RoundConfig(protocol="nv", n=6, m=4, planned_dropouts=1)
    sim = SimConfig(round_cfg=rc, master_seed=16, dropout_rate=0.2,
                    dropout_stage_policy="aggregate_shares")
    report = run_simulation(sim)
    (dropped,) = report.schedule.dropped
    per_client = report.metrics.per_client
    live_example = next(i for i in range(6) if i not in report.schedule.stages)
    # the dropped client sent only its stage-1 traffic
    assert per_client[dropped]["messages_sent"] == 5
    assert per_client[live_example]["messages_sent"] == 10


def test_control_metered_separately():
    rc = RoundConfig(protocol="nv", n=4, m=3)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=17))
    metr = report.metrics
    assert metr.control_messages == 4
    assert CONTROL_STAGE in metr.per_stage
    assert all(v["messages_sent"] == 0 or c == CONTROL_STAGE
               for c, v in [(CONTROL_STAGE, metr.per_stage[CONTROL_STAGE])])


def test_per_client_totals_match_stage_totals():
    rc = RoundConfig(protocol="pw", n=6, m=4, dh=DH_GROUP_TEST)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=18))
    metr = report.metrics
    client_bytes = sum(v["bytes_sent"] for v in metr.per_client.values())
    stage_bytes = sum(v["bytes_sent"] for s, v in metr.per_stage.items()
                      if s != CONTROL_STAGE)
    assert client_bytes == stage_bytes


def test_report_reproducible_modulo_wall_time():
    rc1 = RoundConfig(protocol="lwe", n=5, m=6,
                      lwe=LweParams(n_lwe=16, sigma=1.5))
    rc2 = RoundConfig(protocol="lwe", n=5, m=6,
                      lwe=LweParams(n_lwe=16, sigma=1.5))
    a = run_simulation(SimConfig(round_cfg=rc1, master_seed=19,
                                 dropout_rate=0.2))
    b = run_simulation(SimConfig(round_cfg=rc2, master_seed=19,
                                 dropout_rate=0.2))
    da, db = a.to_dict(), b.to_dict()
    da.pop("wall_time"), db.pop("wall_time")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)


def test_field_ops_recorded():
    rc = RoundConfig(protocol="nv", n=4, m=6)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=20))
    assert report.metrics.total_field_ops > 0
    assert set(report.metrics.field_ops) == set(range(4))


# --- transcript scanner ---------------------------------------------------------------


def test_coalition_view_counts_stay_below_threshold():
    rc = RoundConfig(protocol="pw", n=10, m=4, dh=DH_GROUP_TEST,
                     planned_dropouts=2)
    sim = SimConfig(round_cfg=rc, master_seed=21, dropout_rate=0.2,
                    dropout_stage_policy="masked_vector")
    report = run_simulation(sim, keep_transcript=True)
    coalition = set(list(report.result.contributors)[: math.ceil(0.2 * 10)])
    view = coalition_view(report, coalition)
    t = rc.t
    assert all(c < t for c in view["private_share_counts"].values())
    assert view["raw_input_hits"] == []
    # the dropped clients' DH keys were opened on purpose
    assert any(k[0] == "dh_key" and c >= t
               for k, c in view["opened_share_counts"].items())


def test_coalition_view_requires_transcript():
    rc = RoundConfig(protocol="nv", n=4, m=3)
    report = run_simulation(SimConfig(round_cfg=rc, master_seed=22))
    with pytest.raises(ValueError):
        coalition_view(report, {0})
