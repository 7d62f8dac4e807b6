import math

import numpy as np
import pytest
from gmpy2 import mpq

from moblab import arcs, file_io
from moblab.exceptions import ArgumentError, ParameterError, ResourceError
from moblab.expsum import mobius_expsum, w_k, wk_sum_lemma37, wk_sum_lemma37_shifted
from moblab.phase import PhaseReal, parse_phase
from moblab.sieve import sieve_segment
from moblab.sweep import (
    REPORT_COLUMNS,
    AlphaGrid,
    SweepSpec,
    alpha_points,
    coprime_rationals,
    estimate_work,
    grid_size,
    interval_length,
    lemma37_ratio_report,
    lemma38_dichotomy_report,
    run_sweep,
    uniform_points,
)


def _zero_only(x=1000, theta_list=("0.9",)):
    grid = AlphaGrid(uniform=0, q_max=0, deltas=(), points=("0",))
    return SweepSpec(x=x, theta_list=theta_list, alpha_grid=grid)


def test_grid_helpers():
    assert interval_length(1000, "0.9") == 501
    assert interval_length(10**4, "0.9") == 3981
    assert interval_length(10**6, "1") == 10**6
    assert coprime_rationals(3) == [(0, 1), (1, 2), (1, 3), (2, 3)]
    points = uniform_points(5, seed=3)
    assert points == uniform_points(5, seed=3)
    assert all(0 <= value < 1 and value.denominator <= 2**64 for value in points)
    # the first raw draw of seed 0, read as a double, is numpy's default_rng(0).random()
    assert abs(float(uniform_points(1, seed=0)[0]) - 0.6369616873214543) < 2**-52
    spec = SweepSpec(x=10**4, theta_list=("0.9",), alpha_grid=AlphaGrid(uniform=2, q_max=3, deltas=("1/R",)))
    assert grid_size(spec) == 2 + 4 * 2
    assert estimate_work(spec) == 3981 * 10


def test_spec_validation():
    with pytest.raises(ParameterError):
        AlphaGrid(uniform=0, q_max=0)
    with pytest.raises(ParameterError):
        SweepSpec(x=1000, theta_list=("0.75",))
    with pytest.raises(ParameterError):
        SweepSpec(x=1000, theta_list=("0.9",), k_list=(2,))
    with pytest.raises(ParameterError):
        SweepSpec.from_dict({"x": 1000, "theta_list": [0.9], "colour": "blue"})
    spec = SweepSpec.from_dict({
        "x": 1e3,
        "theta_list": [0.9],
        "alpha_grid": {"uniform": 0, "q_max": 2, "deltas": []},
    })
    assert spec.x == 1000
    assert spec.theta_list == ("0.9",)
    assert spec.alpha_grid == AlphaGrid(uniform=0, q_max=2, deltas=())


def test_zero_only_sweep():
    report = run_sweep(_zero_only())
    assert len(report) == 1
    row = report.rows[0]
    segment = sieve_segment(1000, 501)
    assert row["y"] == 501
    assert (row["label"], row["a"], row["q"], row["lambda"]) == ("A", 0, 1, 0.0)
    assert np.round(abs(row["abs_S"] - abs(int(segment.mu.sum()))), 9) == 0.
    assert row["major_arc_term"] == 501.
    assert row["weyl_abs"] == 501.
    assert np.round(abs(row["lemma31_rhs"] - row["abs_S"]), 9) == 0.
    assert report.summary["trivial_bound_ok"]
    assert report.summary["n_rows"] == 1


def test_rational_sweep_matches_direct():
    grid = AlphaGrid(uniform=0, q_max=3, deltas=())
    spec = SweepSpec(x=10**4, theta_list=("0.9",), alpha_grid=grid)
    report = run_sweep(spec)
    segment = sieve_segment(10**4, 3981)
    params = arcs.arc_params(10**4, 3981, 3, 1.0)
    assert [row["alpha"] for row in report.rows] == ["0/1", "1/2", "1/3", "2/3"]
    for row, (a, q) in zip(report.rows, coprime_rationals(3)):
        alpha = PhaseReal.from_fraction(a, q)
        direct = mobius_expsum(10**4, 3981, 3, alpha, segment)
        assert np.round(abs(row["abs_S"] - abs(direct)), 9) == 0.
        arc = arcs.classify(alpha, params)
        assert (row["label"], row["a"], row["q"]) == (arc.label, arc.witness.a, arc.witness.q)
        assert row["label"] == "A"
        assert np.round(abs(row["major_arc_term"] - float(w_k(q, 3)) * 3981), 6) == 0.
        assert row["abs_S_over_y"] <= 1.0


def test_perturbed_points():
    grid = AlphaGrid(uniform=0, q_max=3, deltas=("1/R", "1/(qQ)"))
    spec = SweepSpec(x=10**4, theta_list=("0.9",), alpha_grid=grid)
    points = alpha_points(spec, 10**4, 3981, 3)
    assert [p.family for p in points].count("perturbed") == 8
    assert points[4].descriptor == "0/1+1/R"
    assert points[4].alpha.value == mpq(1, 10**8 * 3981)
    params = arcs.arc_params(10**4, 3981, 3, 1.0)
    for point in points[4:]:
        arc = arcs.classify(point.alpha, params)
        # a shift of exactly 1/R stays on A; a shift just inside 1/(qQ) lands on B
        assert arc.label == ("A" if point.descriptor.endswith("1/R") else "B")


def test_sweep_is_deterministic():
    grid = AlphaGrid(uniform=3, q_max=2, deltas=("1/R",), points=("golden",))
    spec = SweepSpec(x=2000, theta_list=("0.9",), alpha_grid=grid, seed=5)
    first, second = run_sweep(spec), run_sweep(spec)
    assert first.emit("csv") == second.emit("csv")
    assert first.emit("json") == second.emit("json")
    assert [row["family"] for row in first.rows] == ["point"] + ["uniform"] * 3 + ["rational"] * 2 + ["perturbed"] * 2


def test_sweep_workers_agree():
    grid = AlphaGrid(uniform=2, q_max=2, deltas=())
    serial = SweepSpec(x=2000, theta_list=("0.9", "0.95"), alpha_grid=grid)
    pooled = SweepSpec(x=2000, theta_list=("0.9", "0.95"), alpha_grid=grid, workers=2)
    assert run_sweep(serial).emit("csv") == run_sweep(pooled).emit("csv")


def test_sweep_budget():
    spec = SweepSpec(x=10**4, theta_list=("0.9",), budget_terms=100)
    with pytest.raises(ResourceError):
        run_sweep(spec)


def test_summary():
    grid = AlphaGrid(uniform=2, q_max=3, deltas=())
    report = run_sweep(SweepSpec(x=10**4, theta_list=("0.9", "0.95"), alpha_grid=grid))
    summary = report.summary
    assert set(summary["groups"]) == {"theta=0.9,k=3", "theta=0.95,k=3"}
    group = summary["groups"]["theta=0.9,k=3"]
    assert set(group["max_abs_S_over_y"]) == set(arcs.ARC_LABELS)
    assert group["lemma31_constant"] is not None
    assert np.round(abs(group["log_decay_reference"]["2"] - math.log(3981)**-2), 12) == 0.
    assert "3" in summary["decay_fit"]
    assert summary["trivial_bound_ok"]
    assert summary["max_abs_S_over_y"] <= 1.0
    assert list(report.columns) == list(REPORT_COLUMNS)


def test_lemma38_dichotomy():
    record = lemma38_dichotomy_report(10**4, 10**3, 3, PhaseReal.from_fraction(0, 1), 20, mpq(1, 3840))
    assert record["violations"] == []
    assert (record["branch"], record["a"], record["q"]) == ("major", 0, 1)
    assert np.round(abs(record["ratio"] - 1.0), 12) == 0.
    assert record["dominant"] == "major"
    record = lemma38_dichotomy_report(10**5, 10**5, 3, PhaseReal.from_fraction(1, 2), 4, mpq(1, 48))
    assert (record["branch"], record["q"]) == ("major", 2)
    golden = parse_phase("golden", PhaseReal.required_bits(10**4, 10**3, 3))
    record = lemma38_dichotomy_report(10**4, 10**3, 3, golden, 20, mpq(1, 3840))
    assert record["branch"] == "minor"
    assert record["major_arc_term"] is None
    record = lemma38_dichotomy_report(10**4, 10**3, 3, golden, 20, mpq(1, 100))
    assert record["violations"] == ["rho must satisfy 0 < rho <= sigma_k / gamma"]
    # 64 bits cannot carry n^3 alpha for n near 1.1e6; the record says so
    coarse = parse_phase("golden", 64)
    record = lemma38_dichotomy_report(10**6, 10**5, 3, coarse, 20, mpq(1, 3840))
    assert len(record["violations"]) == 1
    assert "needs 127" in record["violations"][0]
    assert record["weyl_abs"] is None and record["branch"] is None


def test_lemma37_report():
    records = lemma37_ratio_report([20, 10], [8], j=1, k=3, c=1, shifts=(1,))
    assert [(r["kind"], r["N"]) for r in records] == [("plain", 10), ("plain", 20), ("shifted", 10), ("shifted", 20)]
    assert records[0]["lhs"] == wk_sum_lemma37(10, 8, 1, 3, 1)
    assert records[2]["lhs"] == wk_sum_lemma37_shifted(10, 8, 1, 3, 1)
    assert np.round(abs(records[1]["ratio"] - records[1]["lhs"] / (0.5 * 20)), 12) == 0.
    assert records[0]["growth"] is None
    assert records[1]["growth"] is not None
    with pytest.raises(ArgumentError):
        lemma37_ratio_report([1], [8], 1, 3, 1)


@pytest.mark.slow
def test_default_grid_baseline():
    report = run_sweep(SweepSpec(x=10**6, theta_list=("0.85",), k_list=(3,), seed=0))
    assert len(report) == 16 + 128 * 5
    assert report.summary["trivial_bound_ok"]
    group = report.summary["groups"]["theta=0.85,k=3"]
    assert group["y"] == 125892
    for label in arcs.ARC_LABELS:
        key = f"sweep_x1e6_theta0.85_k3_max_abs_S_over_y_{label}"
        assert file_io.check_baseline(key, group["max_abs_S_over_y"][label], "equal", 1e-12)
