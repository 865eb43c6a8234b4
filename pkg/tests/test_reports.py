"""
Unit tests for the report writers
"""

import pytest
import sys
import os
import pandas as pd
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from rsperturb.reports import (
    atomic_write_text,
    lambda_tag,
    output_header,
    read_csv,
    read_json,
    sums_filename,
    write_csv,
    write_json,
)


class TestReports:
    """Test suite for JSON/CSV output"""

    @pytest.fixture
    def header(self):
        return output_header("abc123", "1.0.0")

    def test_header_fields(self, header):
        """Test the reproducibility header"""
        assert header == {"config_hash": "abc123", "version": "1.0.0", "tool": "rsperturb"}

    def test_atomic_write_leaves_no_temporaries(self, tmp_path):
        """Test the target exists and no temporary file is left behind"""
        path = tmp_path / "nested" / "a.txt"
        atomic_write_text(str(path), "hello\n")
        assert path.read_text() == "hello\n"
        assert os.listdir(tmp_path / "nested") == ["a.txt"]

    def test_json_header_and_non_finite(self, tmp_path, header):
        """Test the header is first and non-finite floats become strings"""
        path = str(tmp_path / "r.json")
        write_json(path, header, {"ratio": float("inf"), "values": [1.0, float("nan")]})
        data = read_json(path)
        assert list(data)[0] == "header"
        assert data["header"]["config_hash"] == "abc123"
        assert data["ratio"] == "inf"
        assert data["values"] == [1.0, "nan"]

    def test_json_floats_round_trip_exactly(self, tmp_path, header):
        """Test JSON floats keep full double precision and read back bit-identical"""
        values = [1.0 / 3.0, 0.1 + 0.2, -30885.0 / 1024.0, 5e-324, 1.7976931348623157e308]
        path = str(tmp_path / "p.json")
        write_json(path, header, {"energies": values})
        assert read_json(path)["energies"] == values
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
        assert "0.30000000000000004" in text
        assert "0.3333333333333333" in text

    def test_csv_header_and_round_trip(self, tmp_path, header):
        """Test comment header lines and full float precision"""
        path = str(tmp_path / "t.csv")
        frame = pd.DataFrame({"k": [0, 1], "value": [0.1, 1.0 / 3.0]})
        write_csv(path, header, frame)
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == "# config_hash=abc123"
        assert lines[3] == "k,value"
        back = read_csv(path)
        assert back["value"].tolist() == [0.1, 1.0 / 3.0]

    def test_identical_bytes(self, tmp_path, header):
        """Test repeated writes give byte-identical files"""
        frame = pd.DataFrame({"x": [0.5, -2.25]})
        first = write_csv(str(tmp_path / "a.csv"), header, frame)
        second = write_csv(str(tmp_path / "b.csv"), header, frame)
        with open(first, "rb") as f, open(second, "rb") as g:
            assert f.read() == g.read()

    def test_lambda_tag(self):
        """Test couplings render as file-name safe tags"""
        assert lambda_tag(0.5) == "0.5"
        assert lambda_tag(-0.001) == "m0.001"
        assert sums_filename(0, 0.1) == "sums_0_0.1.csv"
        assert sums_filename(2, -0.5, "out") == os.path.join("out", "sums_2_m0.5.csv")
