import io
import json
import math

import numpy as np
import pytest

from cbitc.beamforming import Scheme
from cbitc.errors import InvalidArgumentError, PackingInfeasibleError
from cbitc.harness import (CSV_HEADER, ExperimentConfig, ResultRow, emit_csv, evaluate_realization,
                           read_csv, run_experiment, write_rows)

SMALL = ExperimentConfig(realizations=3, power_sweep=(20.0, 30.0), cooperation_size=(2, 4))


def test_config_defaults():
    c = ExperimentConfig()
    assert c.realizations == 200 and c.ue_count == 7 and c.icic_tier == 1
    assert c.power_dbm == 30.0 and c.cooperation_size == (4,) and c.exchange_rounds == 3
    assert c.power_sweep == tuple(float(p) for p in range(-10, 45, 5))
    assert set(c.schemes) == set(Scheme)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(realizations=0)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(cooperation_size=1)
    # M is irrelevant without the distributed scheme
    ExperimentConfig(cooperation_size=1, schemes=("NoCB",))
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(channel={"no_such_field": 1})
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_mapping({"realisations": 5})


def test_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 4, "realizations": 2, "shadowing_std": 3.0,
                                "schemes": ["NoCB", "ConvCB"]}))
    c = ExperimentConfig.from_file(path)
    assert c.seed == 4 and c.channel_params().shadowing_std == 3.0
    assert c.schemes == (Scheme.NO_CB, Scheme.CONV_CB)
    path.write_text("[1, 2]")
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_file(path)


def test_deterministic_and_row_layout():
    a = run_experiment(SMALL, "power")
    b = run_experiment(SMALL, "power")
    assert a == b
    # 2 powers x (3 schemes + 2 distributed M values)
    assert len(a) == 10
    assert {r.realization_count for r in a} == {3}
    dist = [r for r in a if r.scheme is Scheme.DISTRIBUTED_ITC]
    assert sorted({r.M for r in dist}) == [2, 4] and {r.L for r in dist} == {3}
    assert all(r.M == 0 and r.L == 0 for r in a if r.scheme is not Scheme.DISTRIBUTED_ITC)
    assert all(r.mean_rate >= 0 for r in a)


def test_rounds_sweep_emits_benchmarks_once():
    rows = run_experiment(SMALL.replace(round_sweep=(1, 2, 3), cooperation_size=(3,)), "rounds")
    assert [r.L for r in rows if r.scheme is Scheme.DISTRIBUTED_ITC] == [1, 2, 3]
    assert sum(r.scheme is Scheme.NO_CB for r in rows) == 1


def test_mean_columns_match_realizations():
    c = SMALL.replace(schemes=("ConvCB",), power_sweep=(30.0,))
    sinrs = [next(iter(evaluate_realization(c, "power", i).values())) for i in range(3)]
    row = run_experiment(c, "power")[0]
    assert row.mean_rate == pytest.approx(np.mean(np.log2(1 + np.array(sinrs))))
    assert row.mean_sinr_dB == pytest.approx(10 * math.log10(np.mean(sinrs)))


def test_no_interference_means_no_itc_gain():
    c = SMALL.replace(ue_sweep=(0,), schemes=("ConvCB", "CentralizedITC"))
    conv, cen = run_experiment(c, "ues")
    assert conv.K == 0 and conv.mean_rate == pytest.approx(cen.mean_rate, rel=1e-12)


def test_sandwich_holds():
    c = SMALL.replace(realizations=5, schemes=("CentralizedITC", "DistributedITC"))
    for i in range(5):
        out = evaluate_realization(c, "power", i)
        for (pt, scheme, m), sinr in out.items():
            if scheme is Scheme.DISTRIBUTED_ITC:
                assert sinr <= out[(pt, Scheme.CENTRALIZED_ITC, 0)] * (1 + 1e-6)


def test_packing_error_names_layout():
    c = ExperimentConfig(realizations=1, tiers=1, ue_count=3, icic_tier=2,
                         cooperation_size=3, schemes=("NoCB",))
    with pytest.raises(PackingInfeasibleError, match="layout 0"):
        run_experiment(c, "power")


def test_altitude_rows_carry_altitude():
    c = SMALL.replace(altitude_sweep=(100.0, 300.0), schemes=("ConvCB",))
    rows = run_experiment(c, "altitude")
    assert [r.uav_altitude for r in rows] == [100.0, 300.0]
    buf = io.StringIO()
    write_rows(rows, buf)
    assert buf.getvalue().splitlines()[0].endswith(",uav_altitude_m")


def test_parallel_matches_serial():
    c = SMALL.replace(realizations=4)
    assert run_experiment(c, "power", parallel=2) == run_experiment(c, "power")


def test_csv_round_trip(tmp_path):
    rows = run_experiment(SMALL, "power")
    path = tmp_path / "out.csv"
    emit_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == len(rows) + 1
    back = read_csv(path)
    for a, b in zip(rows, back):
        assert (a.scheme, a.P_dBm, a.K, a.M, a.L, a.realization_count) == \
               (b.scheme, b.P_dBm, b.K, b.M, b.L, b.realization_count)
        assert b.mean_rate == pytest.approx(a.mean_rate, rel=1e-5)
        assert b.mean_sinr_dB == pytest.approx(a.mean_sinr_dB, rel=1e-5)


def test_csv_single_row_and_empty(tmp_path):
    row = ResultRow(Scheme.NO_CB, 30.0, 7, 0, 0, 1.23456789, 3.0, 1)
    path = tmp_path / "one.csv"
    emit_csv([row], path)
    assert path.read_text().splitlines() == [",".join(CSV_HEADER), "NoCB,30,7,0,0,1.23457,3,1"]
    missing = tmp_path / "empty.csv"
    with pytest.raises(InvalidArgumentError):
        emit_csv([], missing)
    assert not missing.exists()
    with pytest.raises(OSError):
        emit_csv([row], tmp_path / "no_dir" / "x.csv")
