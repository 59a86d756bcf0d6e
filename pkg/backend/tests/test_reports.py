from app.services.reports import csv_text, format_cell, format_table, landing_summary
from app.services.scenario import LandingReport


def test_format_cell():
    assert format_cell(None) == ""
    assert format_cell(True) == "1"
    assert format_cell(0.1) == "0.100000"
    assert format_cell(7) == "7"
    assert format_cell("FULL") == "FULL"


def test_csv_text_has_header_and_fixed_floats():
    text = csv_text(("a", "b"), [(1, 2.5), (None, False)])
    assert text == "a,b\n1,2.500000\n,0\n"


def test_format_table_aligns_columns():
    lines = format_table(("name", "n"), [("x", 10), ("long", 2)]).splitlines()
    assert lines[0] == "name   n"
    assert lines[1] == "----  --"
    assert lines[2] == "   x  10"


def test_landing_summary():
    report = LandingReport(
        touchdown=False,
        touchdown_speed_mps=0.0,
        touchdown_inclination_error_rad=0.0,
        steps_elapsed=100,
        success=False,
        degraded=True,
    )
    assert landing_summary(report) == "FAILURE: no touchdown after 100 steps (degraded thresholds)"
