import csv
import io
import json

import pytest

from mrcwpt import cli
from mrcwpt.stochastic import OutageQuery, min_power_zero_outage


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def test_db_conversions_roundtrip():
    assert cli.db_to_watts(10.0) == pytest.approx(10.0)
    assert cli.watts_to_db(cli.db_to_watts(24.5847)) == pytest.approx(24.5847)


def test_calibrate_omega_roundtrip(capsys, e_ref):
    code, out, _ = run(capsys, "calibrate-omega")
    assert code == 0
    row = table(out)[0]
    assert float(row["roundtrip_db"]) == pytest.approx(cli.ANCHOR_DB, abs=1e-9)
    assert float(row["coil_constant"]) == pytest.approx(e_ref, rel=1e-12)


def test_calibrated_omega_reproduces_anchor(params):
    q = OutageQuery(params.power_threshold, 0.5, 1.0, params.rx_resistance)
    assert cli.watts_to_db(min_power_zero_outage(params, q)) == pytest.approx(24.5847, abs=1e-9)


def test_fig4_policies(capsys):
    code, out, _ = run(capsys, "fig4", "--calibrate-omega")
    assert code == 0
    rows = table(out)
    power = {(r["policy"], int(r["receiver"])): float(r["power_w"]) for r in rows}
    for i in range(1, 5):
        assert power["equilibrium", i] >= power["matched", i] >= power["upper", i]
    for policy in ("equilibrium", "matched", "upper"):
        seq = [power[policy, i] for i in range(1, 5)]
        assert seq == sorted(seq, reverse=True)
    loads = [float(r["load"]) for r in rows if r["policy"] == "equilibrium"]
    assert loads == pytest.approx([0.1505, 0.0796, 0.0776, 0.0716], abs=5e-4)


def test_fig3_curve_properties(capsys):
    code, out, _ = run(capsys, "fig3", "--calibrate-omega", "--trials", "4000")
    assert code == 0
    rows = table(out)
    by_case = {}
    for r in rows:
        by_case.setdefault(int(r["case"]), []).append(r)
    assert len(by_case) == 6
    for curve in by_case.values():
        outage = [float(r["analytic"]) for r in curve]
        assert all(0 <= p <= 1 for p in outage)
        assert all(a >= b for a, b in zip(outage, outage[1:]))
        pmin = float(curve[0]["min_power_db"])
        assert all(float(r["analytic"]) == 0 for r in curve if float(r["power_db"]) >= pmin)
    at = {c: float(v[0]["min_power_db"]) for c, v in by_case.items()}
    assert at[2] == pytest.approx(24.5847, abs=1e-6)
    # Larger R or a mismatched load needs more power.
    assert at[1] > at[0] and at[5] > at[2]
    assert at[2] < at[3] < at[4]


def test_fig2_small_run(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sweep: {start: 10, stop: 20, step: 10}\n")
    code, out, _ = run(capsys, "fig2", "--calibrate-omega", "--config", str(cfg),
                       "--trials", "2000")
    assert code == 0
    rows = table(out)
    assert len(rows) == 8
    assert {"analytic", "mc_unit_mean", "mc_exact_mean", "lambda"} <= set(rows[0])


def test_unknown_config_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("params:\n  omgea: 1.0e7\n")
    code, _, err = run(capsys, "fig4", "--config", str(cfg))
    assert code == 1 and "omgea" in err
    cfg.write_text("extras: {}\n")
    assert run(capsys, "fig4", "--config", str(cfg))[0] == 1


def test_config_omega_is_used(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("params:\n  omega: 1.0e7\n")
    code, out, _ = run(capsys, "equilibrium", "--config", str(cfg))
    assert code == 0 and "# omega_source: config" in out


def test_missing_omega_fails(capsys):
    code, out, err = run(capsys, "outage")
    assert code == 1 and out == "" and "omega" in err


def test_power_flags_mutually_exclusive(capsys):
    with pytest.raises(SystemExit):
        cli.main(["outage", "--omega", "1e7", "--power-db", "10", "--power-watts", "10"])
    with pytest.raises(SystemExit):
        cli.main(["outage", "--omega", "1e7", "--calibrate-omega"])


def test_json_lines_output(capsys):
    code, out, _ = run(capsys, "outage", "--calibrate-omega", "--power-db", "30",
                       "--format", "json-lines")
    assert code == 0
    lines = [json.loads(line) for line in out.splitlines()]
    assert "meta" in lines[0] and lines[0]["meta"]["omega_source"] == "calibrated"
    assert 0 <= lines[1]["analytic"] <= 1


def test_outage_loose_query(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("query: {regime: loose, alignment: 0.5, load: r}\n")
    code, out, _ = run(capsys, "outage", "--calibrate-omega", "--config", str(cfg),
                       "--power-db", "25")
    assert code == 0
    assert float(table(out)[0]["analytic"]) == 0.0


def test_reruns_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--calibrate-omega", "--trials", "30000", "--seed", "5",
            "--angle-mode", "exact"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_equilibrium_nonconvergence_exit_code(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("game: {max_sweeps: 1, tolerance: 1.0e-300}\n")
    code, _, err = run(capsys, "equilibrium", "--calibrate-omega", "--config", str(cfg))
    assert code == 1 and "sweeps" in err
