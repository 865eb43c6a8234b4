"""
End-to-end tests for the command-line entry point
"""

import json
import pytest
import sys
import os
import numpy as np
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from cli import main
from rsperturb.reports import read_csv, read_json


def write_config(tmp_path, document, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document) if isinstance(document, dict) else document)
    return str(path)


class TestCommandLine:
    """Test suite for cli.main"""

    @pytest.fixture
    def quartic_config(self, tmp_path):
        return write_config(tmp_path, {
            "order": 4,
            "lambda_targets": [0.1],
            "oracle": {"fd_step": 0.001, "fd_order": 2},
        })

    def test_solve_quartic(self, tmp_path, quartic_config):
        """Test solve writes a five-coefficient series"""
        out = tmp_path / "out"
        assert main(["solve", "--config", quartic_config, "--out", str(out), "--quiet"]) == 0
        series = read_json(str(out / "series.json"))
        energies = series["series"][0]["energies"]
        assert len(energies) == 5
        assert energies[1] == pytest.approx(0.75, abs=1e-8)
        report = read_json(str(out / "report.json"))
        assert report["coefficient_agreement"][0]["status"] == "ok"

    def test_solve_is_deterministic(self, tmp_path, quartic_config):
        """Test two runs of the same config produce identical bytes"""
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["solve", "--config", quartic_config, "--out", str(first), "--quiet"]) == 0
        assert main(["solve", "--config", quartic_config, "--out", str(second), "--quiet"]) == 0
        for name in ("series.json", "report.json", "sums_0_0.1.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_headers_carry_config_hash(self, tmp_path, quartic_config):
        """Test JSON and CSV outputs start with the config hash"""
        out = tmp_path / "out"
        main(["solve", "--config", quartic_config, "--out", str(out), "--quiet"])
        digest = read_json(str(out / "series.json"))["header"]["config_hash"]
        assert len(digest) == 64
        first_line = (out / "sums_0_0.1.csv").read_text().splitlines()[0]
        assert first_line == f"# config_hash={digest}"

    def test_degenerate_state_exit_code(self, tmp_path, capsys):
        """Test a symmetric double well is refused with exit code 2"""
        config = write_config(tmp_path, {"model": {
            "representation": "lattice",
            "potential": {"kind": "polynomial", "coefficients": [0, 0, -20, 0, 1]}}})
        code = main(["solve", "--config", config, "--out", str(tmp_path / "out"), "--quiet"])
        assert code == 2
        assert "order 0" in capsys.readouterr().err

    def test_input_errors_exit_one(self, tmp_path):
        """Test malformed JSON, a missing file and unknown keys"""
        out = str(tmp_path / "out")
        broken = write_config(tmp_path, '{"order": 4', "broken.json")
        assert main(["solve", "--config", broken, "--out", out, "--quiet"]) == 1
        assert main(["solve", "--config", str(tmp_path / "missing.json"), "--out", out,
                     "--quiet"]) == 1
        unknown = write_config(tmp_path, {"order": 4, "colour": "blue"}, "unknown.json")
        assert main(["solve", "--config", unknown, "--out", out, "--quiet"]) == 1

    def test_sweep_toy(self, tmp_path):
        """Test the sweep table against the closed-form toy energy"""
        config = write_config(tmp_path, {
            "model": {"representation": "toy2x2"},
            "order": 4,
            "policies": [{"kind": "none"}, {"kind": "recenter_full"}],
            "lambda_targets": [0.1, 0.2, 0.3],
        })
        out = tmp_path / "out"
        assert main(["sweep", "--config", config, "--out", str(out), "--quiet"]) == 0
        frame = read_csv(str(out / "sweep.csv"))
        assert len(frame) == 6
        assert set(frame["status"]) == {"ok"}
        for _, row in frame[frame["policy"] == "none"].iterrows():
            lam = row["lambda"]
            expected = abs((-lam ** 2 / 2 + lam ** 4 / 8) - (1.0 - np.sqrt(1.0 + lam ** 2)))
            assert row["abs_error"] == pytest.approx(expected, abs=1e-10)
        assert (frame[frame["policy"] == "recenter_full"]["abs_error"] < 1e-12).all()

    def test_sweep_without_targets(self, tmp_path):
        """Test an empty target list is an input error"""
        config = write_config(tmp_path, {"model": {"representation": "toy2x2"},
                                         "lambda_targets": []})
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "out"), "--quiet"]) == 1

    def test_oracle_quartic(self, tmp_path, quartic_config):
        """Test the oracle command reproduces E1 = 3/4 on a one-point grid"""
        out = tmp_path / "out"
        assert main(["oracle", "--config", quartic_config, "--out", str(out), "--quiet"]) == 0
        report = read_json(str(out / "oracle.json"))
        assert report["fd_coefficients"][1]["estimate"] == pytest.approx(0.75, abs=1e-7)
        assert len(read_csv(str(out / "oracle_energies.csv"))) == 1

    def test_oracle_noisy_step(self, tmp_path):
        """Test a rounding-level step is refused with exit code 2"""
        config = write_config(tmp_path, {"order": 2, "oracle": {"fd_step": 1e-12}})
        assert main(["oracle", "--config", config, "--out", str(tmp_path / "out"), "--quiet"]) == 2

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        """Test RSPT_OUT_DIR is used when neither --out nor the config name one"""
        target = tmp_path / "from-env"
        monkeypatch.setenv("RSPT_OUT_DIR", str(target))
        config = write_config(tmp_path, {"model": {"representation": "toy2x2"}, "order": 2})
        assert main(["solve", "--config", config, "--quiet"]) == 0
        assert (target / "series.json").exists()
