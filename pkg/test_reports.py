"""
Test CSV curve files and key-value / JSON reports
"""
import json
import math

import numpy as np
import pytest

from core.errors import CurveFormatError
from core.hom import ProbabilityCurve
from core.montecarlo import CurvePoint, DipCurve
from core.reports import (
    format_number,
    read_curve_csv,
    write_dip_curve_csv,
    write_probability_csv,
    write_report,
    write_rows_csv,
)


def test_format_number():
    assert format_number(3) == "3"
    assert format_number(3.0) == "3"
    assert format_number(np.int64(7)) == "7"
    assert format_number(0.1) == "0.1"
    assert format_number(1.0 / 3.0) == repr(1.0 / 3.0)
    assert format_number(True) == "true"
    assert format_number(math.inf) == "inf"


def test_dip_curve_file(tmp_path):
    curve = DipCurve([CurvePoint(-4.0, 1790, 500000), CurvePoint(0.0, 512, 500000), CurvePoint(4.0, 1801, 500000)])
    path = write_dip_curve_csv(curve, tmp_path / "out" / "curve.csv")
    assert path.read_text().splitlines() == [
        "delay_ps,coincidences,starts",
        "-4,1790,500000",
        "0,512,500000",
        "4,1801,500000",
    ]
    again = read_curve_csv(path)
    assert isinstance(again, DipCurve)
    assert again.points == curve.points


def test_probability_curve_file(tmp_path):
    curve = ProbabilityCurve(np.array([-1.0, 0.0, 1.0]), np.array([0.25, 0.0, 0.25]), "model")
    path = write_probability_csv(curve, tmp_path / "p.csv")
    again = read_curve_csv(path)
    assert isinstance(again, ProbabilityCurve)
    assert again.generator == "file"
    np.testing.assert_array_equal(again.probabilities, [0.25, 0.0, 0.25])


@pytest.mark.parametrize("text,row", [
    ("delay,counts\n0,1\n", 1),
    ("delay_ps,coincidences,starts\n0,12,100\n4,abc,100\n", 3),
    ("delay_ps,coincidences,starts\n0,12,100\n0,13,100\n", 3),
    ("delay_ps,coincidences,starts\n0,-1,100\n", 2),
    ("delay_ps,coincidences,starts\n0,1,2.5\n", 2),
    ("delay_ps,coincidences,starts\n0,1\n", 2),
    ("delay_ps,probability\n0,nan\n", 2),
    ("delay_ps,probability\n", 2),
    ("", 1),
])
def test_malformed_curve_reports_row(tmp_path, text, row):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(CurveFormatError) as info:
        read_curve_csv(path)
    assert info.value.row == row


def test_missing_curve_file(tmp_path):
    with pytest.raises(CurveFormatError):
        read_curve_csv(tmp_path / "absent.csv")


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("delay_ps,probability\n-1,0.2\n\n1,0.2\n")
    assert len(read_curve_csv(path)) == 2


def test_rows_csv(tmp_path):
    path = write_rows_csv(["value", "V_fit"], [[0.05, 0.7], [0.2, np.float64(0.5)]], tmp_path / "sweep.csv")
    assert path.read_text().splitlines() == ["value,V_fit", "0.05,0.7", "0.2,0.5"]


def test_report_files(tmp_path):
    data = {"V": np.float64(0.5), "points": np.int64(21), "covariance": np.eye(2), "converged": np.bool_(True)}
    json_path, text_path = write_report(tmp_path / "run_fit", data)
    assert json_path.name == "run_fit.json"
    loaded = json.loads(json_path.read_text())
    assert loaded == {"V": 0.5, "points": 21, "covariance": [[1.0, 0.0], [0.0, 1.0]], "converged": True}
    lines = text_path.read_text().splitlines()
    assert lines[0] == "V = 0.5"
    assert "points = 21" in lines


def test_report_with_given_text(tmp_path):
    _, text_path = write_report(tmp_path / "budget", {"visibility": 0.7}, text="table")
    assert text_path.read_text() == "table\n"


def test_report_json_has_no_bare_infinity(tmp_path):
    data = {"sigma_err_ps": math.inf, "covariance": np.array([[1.0, math.inf], [math.inf, math.inf]])}
    json_path, text_path = write_report(tmp_path / "degenerate_fit", data)

    def reject(token):
        raise ValueError(f"non-standard JSON constant {token}")

    loaded = json.loads(json_path.read_text(), parse_constant=reject)
    assert loaded == {"sigma_err_ps": "inf", "covariance": [[1.0, "inf"], ["inf", "inf"]]}
    assert "sigma_err_ps = inf" in text_path.read_text().splitlines()
