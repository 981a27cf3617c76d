from __future__ import annotations

import math

from src.logger import LOSS_TABLE_FIELDS, LossTableCsvLogger, log_event, set_verbose
from src.settings import FORMAT_TABLE, POLICY_ERROR, POLICY_SKIP, load_runtime_settings


def test_defaults(monkeypatch):
    for name in ("SHIFT_MARGIN", "LOG_BASE", "STRICT_REL_TOL"):
        monkeypatch.delenv(name, raising=False)
    settings = load_runtime_settings()
    assert settings.zero_actual_policy == POLICY_SKIP
    assert settings.output_format == FORMAT_TABLE
    assert settings.log_base == math.e
    assert settings.verify_trials == 200
    assert settings.fisher_trials == 1000
    assert settings.rank_tie_rel_tol == 1e-9


def test_bad_values_fall_back(monkeypatch):
    monkeypatch.setenv("ZERO_ACTUAL_POLICY", "ERROR")
    monkeypatch.setenv("LOG_BASE", "0.5")
    monkeypatch.setenv("VERIFY_TRIALS", "-3")
    monkeypatch.setenv("PERTURBATION_SCALE", "nan")
    settings = load_runtime_settings()
    assert settings.zero_actual_policy == POLICY_ERROR
    assert settings.log_base == math.e
    assert settings.verify_trials == 1
    assert settings.perturbation_scale == 0.5


def test_log_event_goes_to_stderr(capsys):
    set_verbose(False)
    log_event("INFO", hidden=1)
    log_event("WARNING", zero_actual_skipped=2, units=["a", "b"])
    captured = capsys.readouterr()
    assert captured.out == ""
    assert captured.err == "WARNING: zero_actual_skipped=2 units=[a,b]\n"


def test_loss_table_backs_up_mismatched_header(tmp_path):
    path = tmp_path / "loss_table.csv"
    path.write_text("old,header\n1,2\n", encoding="utf-8")
    logger = LossTableCsvLogger(str(path))
    logger.append({"metric": "MAPE", "column": "p1", "unit_id": "a", "loss": "10.0"})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(LOSS_TABLE_FIELDS)
    assert lines[1] == "MAPE,p1,,a,,,,10.0"
    assert len(list(tmp_path.glob("loss_table_backup_*.csv"))) == 1
