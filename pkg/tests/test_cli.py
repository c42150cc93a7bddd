import csv
import io
import json
import math

import numpy as np
import pytest

from vpspec.cli import FIELD_COLUMNS, GREEN_COLUMNS, SPECTRAL_COLUMNS, SYNTHESIS_COLUMNS, main
from vpspec.equilibria import survival_threshold


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return header, body


def notes(text):
    return [ln[2:] for ln in text.splitlines() if ln.startswith("# ")]


def write_config(tmp_path, cfg):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_moments_compact(capsys):
    code, out, _ = run(capsys, "moments")
    assert code == 0
    k0 = float(next(ln for ln in out.splitlines() if ln.startswith("kappa0")).split("=")[1])
    assert k0 == pytest.approx(0.9501, abs=1e-4)


def test_moments_gaussian_has_zero_threshold(capsys):
    code, out, _ = run(capsys, "moments", "--profile", "gaussian")
    assert code == 0
    assert "kappa0 = 0.0000000000000000e+00" in out


def test_invalid_profile_exits_one(tmp_path, capsys):
    cfg = write_config(tmp_path, {"profile": {"family": "compact_polynomial", "params": {"A": -1.0}}})
    code, _, err = run(capsys, "moments", "--config", cfg)
    assert code == 1
    assert "negativity" in err


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "branch", "--kmin", "abc")[0] == 1
    assert run(capsys, "verify", "--config", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "branch", "--knum", "0")[0] == 1
    assert run(capsys, "moments", "--profile", "lorentzian")[0] == 1


def test_branch_csv(capsys):
    code, out, _ = run(capsys, "branch", "--knum", "40")
    assert code == 0
    header, body = read_csv(out)
    assert header == SPECTRAL_COLUMNS
    assert body.shape == (40, len(SPECTRAL_COLUMNS))
    assert np.all(np.diff(body[:, 1]) > 0)
    ups = math.sqrt(2)
    assert body[-1, 4] == pytest.approx(ups, abs=1e-8)
    assert "convex=True" in notes(out)[0]


def test_branch_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "branch", "--knum", "25", "--out", str(a))[0] == 0
    assert run(capsys, "branch", "--knum", "25", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_landau_csv(compact, capsys):
    code, out, _ = run(capsys, "landau", "--knum", "5")
    assert code == 0
    header, body = read_csv(out)
    assert header == SPECTRAL_COLUMNS + ["predicted_rate", "ratio", "flag"]
    assert np.all(body[:, 5] < 0)
    assert np.all(body[:, -1] == 0)
    assert np.all(body[:, 7] < 1e-10)


def test_landau_rejects_k_below_threshold(compact, capsys):
    k0 = survival_threshold(compact)
    code, _, err = run(capsys, "landau", "--kmin", str(k0 / 2), "--kmax", str(k0 + 0.01), "--knum", "3")
    assert code == 1
    assert "kappa0" in err


def test_green_csv_and_oracle_delta(compact, capsys):
    code, out, _ = run(capsys, "green", "--tmax", "10", "--tnum", "1001")
    assert code == 0
    header, body = read_csv(out)
    assert header == GREEN_COLUMNS
    assert body.shape[0] == 1001
    delta = float(notes(out)[-1].split()[-1])
    assert delta <= 1e-4


def test_green_warns_on_coarse_grid(capsys):
    code, out, err = run(capsys, "green", "--tmax", "10", "--tnum", "101")
    assert code == 0
    assert "warning" in err
    assert any("warning" in n for n in notes(out))


def test_evolve_writes_field_and_synthesis(tmp_path, capsys):
    cfg = write_config(tmp_path, {"t": {"max": 10, "num": 1001}, "synthesis": {"t_min": 10, "t_max": 200, "num": 20}})
    out = tmp_path / "field.csv"
    code, _, _ = run(capsys, "evolve", "--config", cfg, "--out", str(out))
    assert code == 0
    header, body = read_csv(out.read_text())
    assert header == FIELD_COLUMNS
    residual = float(notes(out.read_text())[0].split()[-1])
    assert residual <= 1e-6
    syn_header, syn = read_csv((tmp_path / "field.synthesis.csv").read_text())
    assert syn_header == SYNTHESIS_COLUMNS
    assert syn[0, 2] == pytest.approx(1.5, abs=0.1)


def test_evolve_zero_data_gives_zero_output(tmp_path, capsys):
    cfg = write_config(tmp_path, {"t": {"max": 5, "num": 501}, "data": {"amplitude": 0.0}, "synthesis": None})
    code, out, _ = run(capsys, "evolve", "--config", cfg)
    assert code == 0
    _, body = read_csv(out)
    assert np.all(body[:, 2:] == 0)


def test_flags_override_config(tmp_path, capsys):
    cfg = write_config(tmp_path, {"k": {"num": 7}})
    _, out, _ = run(capsys, "branch", "--config", cfg, "--knum", "3")
    assert read_csv(out)[1].shape[0] == 3


def test_verify_passes_and_tampered_tolerance_fails(tmp_path, capsys):
    out = tmp_path / "verify.json"
    assert run(capsys, "verify", "--out", str(out))[0] == 0
    summary = json.loads(out.read_text())
    assert summary["passed"]
    code, text, _ = run(capsys, "verify", "--tol", "1e-30")
    assert code == 1
    failed = [c["name"] for c in json.loads(text)["checks"] if not c["passed"]]
    assert "oracle_equivalence" in failed


def test_verify_rejects_nonpositive_tolerance(capsys):
    assert run(capsys, "verify", "--tol", "-1")[0] == 1
