"""Evaluation metrics: Pearson correlation, stratified trigger resampling,
outlier handling, and report serialization."""
import json

import numpy as np
import pytest

from griplab.evaluation import (
    IDEAL_SLOPE,
    MIN_OCCUPIED_BINS,
    MIN_PAIRS,
    N_TRIGGER_BINS,
    CorrelationReport,
    EvalReport,
    InsufficientCoverage,
    evaluate,
    pearson_r,
    stratified_resample,
    trigger_force_correlation,
    write_report,
)
from griplab.scenario import FactorSwitches

OBJ_ONLY = FactorSwitches(True, False, False)
ALL_ON = FactorSwitches(True, True, True)


def line_pairs(n=400, slope=IDEAL_SLOPE, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, n)
    f = slope * t + noise * rng.standard_normal(n)
    return np.column_stack([t, f])


# ------------------------------------------------------------- pearson_r


def test_pearson_exact_lines():
    x = np.linspace(0.0, 1.0, 50)
    assert pearson_r(x, 10.0 * x) == pytest.approx(1.0)
    assert pearson_r(x, -3.0 * x + 2.0) == pytest.approx(-1.0)
    assert pearson_r(x, np.full_like(x, 0.7)) == pytest.approx(0.0, abs=1e-12)
    assert pearson_r(x, np.zeros_like(x)) == 0.0  # exact zero-variance path


def test_pearson_matches_numpy():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(300)
    y = 0.4 * x + rng.standard_normal(300)
    assert pearson_r(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


def test_pearson_affine_invariance():
    rng = np.random.default_rng(6)
    x = rng.uniform(0, 1, 200)
    y = rng.uniform(0, 1, 200)
    r = pearson_r(x, y)
    assert pearson_r(x, 4.2 * y + 3.0) == pytest.approx(r, abs=1e-12)
    assert pearson_r(x, -1.5 * y + 0.2) == pytest.approx(-r, abs=1e-12)


# -------------------------------------------------- stratified resampling


def test_resample_preserves_bin_means_on_full_cycles():
    # 5 rows per bin and a 50-row draw means ten full permutation cycles,
    # so every source row appears exactly ten times and bin means survive
    centers = (np.arange(N_TRIGGER_BINS) + 0.5) / N_TRIGGER_BINS
    t = np.repeat(centers, 5)
    f = np.arange(t.size, dtype=float)
    pairs = np.column_stack([t, f])
    out, occupied = stratified_resample(pairs)
    assert occupied == N_TRIGGER_BINS
    for c in centers:
        src = pairs[pairs[:, 0] == c, 1]
        got = out[out[:, 0] == c, 1]
        assert got.size == out.shape[0] // N_TRIGGER_BINS
        assert got.mean() == pytest.approx(src.mean(), abs=1e-12)


def test_resample_equalizes_bin_weights():
    # 90% of the mass lands in one bin; after resampling every occupied
    # bin must contribute the same count
    rng = np.random.default_rng(2)
    heavy = np.column_stack([rng.uniform(0.0, 0.05, 900), rng.uniform(0, 1, 900)])
    light = np.column_stack([rng.uniform(0.05, 1.0, 100), rng.uniform(0, 1, 100)])
    out, occupied = stratified_resample(np.vstack([heavy, light]))
    edges = np.linspace(0.0, 1.0, N_TRIGGER_BINS + 1)
    idx = np.clip(np.digitize(out[:, 0], edges) - 1, 0, N_TRIGGER_BINS - 1)
    counts = np.bincount(idx, minlength=N_TRIGGER_BINS)
    nonzero = counts[counts > 0]
    assert nonzero.size == occupied
    assert np.all(nonzero == nonzero[0])


def test_resample_default_is_deterministic():
    pairs = line_pairs(n=400, noise=1.0, seed=9)
    a, _ = stratified_resample(pairs)
    b, _ = stratified_resample(pairs)
    assert np.array_equal(a, b)


def test_resample_rejects_narrow_coverage():
    rng = np.random.default_rng(3)
    pairs = np.column_stack([rng.uniform(0.0, 0.3, 500), rng.uniform(0, 1, 500)])
    with pytest.raises(InsufficientCoverage, match="bins"):
        stratified_resample(pairs)


# ------------------------------------------------- correlation pipeline


def test_correlation_perfect_line():
    rep = trigger_force_correlation(line_pairs(n=500))
    assert rep.r == pytest.approx(1.0)
    assert rep.n_pairs == 500
    assert rep.n_used == int(np.ceil(500 * 0.95))
    assert rep.ideal_slope == IDEAL_SLOPE


def test_correlation_drops_top_force_outliers():
    pairs = line_pairs(n=950, seed=4)
    rng = np.random.default_rng(7)
    junk = np.column_stack([rng.uniform(0, 1, 50), rng.uniform(400, 500, 50)])
    rep = trigger_force_correlation(np.vstack([pairs, junk]))
    # raw r is wrecked by the spikes; the trimmed estimate is not
    assert pearson_r(*np.vstack([pairs, junk]).T) < 0.6
    assert rep.r > 0.98
    assert rep.n_used == int(np.ceil(1000 * 0.95))


def test_correlation_input_validation():
    with pytest.raises(ValueError, match="N,2"):
        trigger_force_correlation(np.zeros((10, 3)))
    with pytest.raises(ValueError, match="at least"):
        trigger_force_correlation(line_pairs(n=MIN_PAIRS - 1))


def test_anticorrelated_input_reports_negative_r():
    rep = trigger_force_correlation(line_pairs(n=300, slope=-8.0))
    assert rep.r < -0.95


# ------------------------------------------------------------- evaluate


def open_hand(obs):
    return -np.ones(23)


def test_evaluate_aggregates_and_is_deterministic():
    a = evaluate(open_hand, 4, OBJ_ONLY, seed=12, shapes=None)
    b = evaluate(open_hand, 4, OBJ_ONLY, seed=12, shapes=None)
    assert a.episodes == 4
    assert 0.0 <= a.esr <= 1.0
    assert a.mean_frames <= 90.0
    assert a.pr >= 0.0 and a.fr >= 0.0
    assert a.to_dict() == b.to_dict()


def test_evaluate_reports_coverage_failure_on_fixed_trigger():
    # one trigger value occupies one bin: correlation must refuse, not lie
    rep = evaluate(open_hand, 2, OBJ_ONLY, seed=3, fixed_trigger=0.6)
    assert rep.correlation is None
    assert "bins" in rep.correlation_error


def test_evaluate_rejects_zero_episodes():
    with pytest.raises(ValueError, match="n_episodes"):
        evaluate(open_hand, 0, OBJ_ONLY)


def test_report_validation():
    with pytest.raises(ValueError, match="ESR"):
        EvalReport(episodes=1, esr=1.2, pr=0.0, fr=0.0, mean_frames=90.0)
    with pytest.raises(ValueError, match="non-negative"):
        EvalReport(episodes=1, esr=0.5, pr=-0.1, fr=0.0, mean_frames=90.0)


def test_write_report_files(tmp_path):
    corr = trigger_force_correlation(line_pairs(n=300))
    rep = EvalReport(episodes=3, esr=1.0, pr=0.2, fr=0.1, mean_frames=90.0,
                     correlation=corr)
    jp, cp, sp = tmp_path / "r.json", tmp_path / "r.csv", tmp_path / "s.csv"
    write_report(rep, jp, csv_path=cp, scatter_path=sp)

    d = json.loads(jp.read_text())
    assert d["esr"] == 1.0
    assert d["correlation"]["r"] == pytest.approx(corr.r)
    assert d["correlation"]["n_resampled"] == corr.resampled.shape[0]
    assert any(row["row"] == "published-full-scale-C1" for row in d["reference"])

    lines = cp.read_text().strip().splitlines()
    assert lines[0] == "metric,value"
    assert any(ln.startswith("pearson_r,") for ln in lines)

    scatter = sp.read_text().strip().splitlines()
    assert scatter[0] == "trigger,force_kgf"
    assert len(scatter) - 1 == corr.resampled.shape[0]
