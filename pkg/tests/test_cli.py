import json

import pytest

from hho_wave.cli import (
    StudyConfig,
    check_rates,
    main,
    run_selftest,
    run_study,
    write_reports,
)
from hho_wave.errors import ConvergenceReport, ConvergenceRow


def test_config_validation_messages():
    with pytest.raises(ValueError):
        StudyConfig(variant="bogus").validate()
    with pytest.raises(ValueError):
        StudyConfig(degree=7).validate()
    with pytest.raises(ValueError):
        StudyConfig(scheme="euler").validate()
    with pytest.raises(ValueError):
        StudyConfig(refinements=0).validate()
    with pytest.raises(ValueError):
        StudyConfig(ic="random").validate()
    StudyConfig().validate()


def test_unknown_variant_exits_1(tmp_path, capsys):
    assert main(["--variant", "bogus", "--out", str(tmp_path / "x")]) == 1
    assert "variant" in capsys.readouterr().err


def test_bad_config_file_exits_1(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nonsense_key": 1}))
    assert main(["--config", str(cfg)]) == 1


def test_config_file_overridden_by_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"degree": 0, "variant": "mixed", "mesh": 2,
                               "refinements": 2, "tfinal": 0.25}))
    out = tmp_path / "study"
    assert main(["--config", str(cfg), "--degree", "1", "--out", str(out)]) == 0
    doc = json.loads((tmp_path / "study.json").read_text())
    assert doc["config"]["degree"] == 1  # flag wins
    assert doc["config"]["variant"] == "mixed"  # file survives


def test_study_writes_artifacts_and_echoes_config(tmp_path):
    out = tmp_path / "study"
    rc = main(["--degree", "0", "--variant", "equal", "--mesh", "2",
               "--refinements", "2", "--tfinal", "0.25", "--out", str(out)])
    assert rc == 0
    csv = (tmp_path / "study.csv").read_text()
    assert csv.splitlines()[0].startswith("schema_version,h,dofs,err_sigma")
    doc = json.loads((tmp_path / "study.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["config"]["variant"] == "equal"
    assert doc["config"]["ic"] == "h-interp"
    assert len(doc["report"]["rows"]) == 2
    assert "numpy" in doc["environment"]


def test_identical_config_gives_identical_csv(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["--degree", "1", "--variant", "mixed", "--mesh", "2",
                     "--refinements", "2", "--tfinal", "0.25", "--out", str(out)]) == 0
        outs.append((tmp_path / f"{name}.csv").read_bytes())
    assert outs[0] == outs[1]


def test_assert_rates_pass_and_fail(tmp_path):
    # healthy rates at k=1 mixed (finest pair of 3 levels)
    rc = main(["--degree", "1", "--variant", "mixed", "--mesh", "2",
               "--refinements", "3", "--tfinal", "0.5",
               "--out", str(tmp_path / "ok"), "--assert-rates"])
    assert rc == 0
    # a single level cannot demonstrate any rate
    rc = main(["--degree", "1", "--variant", "mixed", "--mesh", "2",
               "--refinements", "1", "--tfinal", "0.25",
               "--out", str(tmp_path / "bad"), "--assert-rates"])
    assert rc == 2


def test_check_rates_flags_slow_columns():
    rep = ConvergenceReport(variant="equal", degree=1, scheme="midpoint",
                            t_final=1.0, ic_mode="h-interp")
    for h, e in ((0.5, 1.0), (0.25, 0.9)):  # barely decaying: all rates fail
        rep.rows.append(ConvergenceRow(h=h, dofs=1, err_sigma=e, err_v=e,
                                       stab_seminorm=e, err_int_v=e, err_int_v_plain=e))
    failures = check_rates(rep)
    assert len(failures) == 3


def test_jobs_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HHO_WAVE_JOBS", "2")
    out = tmp_path / "study"
    assert main(["--degree", "0", "--variant", "equal", "--mesh", "2",
                 "--refinements", "1", "--tfinal", "0.25", "--out", str(out)]) == 0
    doc = json.loads((tmp_path / "study.json").read_text())
    assert doc["config"]["jobs"] == 2


def test_write_reports_sixteen_digit_floats(tmp_path):
    cfg = StudyConfig(mesh=2, refinements=2, tfinal=0.25, degree=0,
                      out=str(tmp_path / "r"))
    report = run_study(cfg)
    csv_path, _ = write_reports(report, cfg)
    row = open(csv_path).read().splitlines()[1].split(",")
    assert "e-" in row[1] or "e+" in row[1]
    mantissa = row[1].split("e")[0].replace("-", "").replace(".", "")
    assert len(mantissa) == 16


def test_selftest_passes():
    assert run_selftest(verbose=False)
