import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glancing import filter_solver as fs
from glancing.geometry import Curve
from glancing.operators import PlaneWave, WaveConfig, assemble_ccfio, rhs, solve_dense

CIRCLE = Curve.circle(1.0)


@pytest.fixture(scope="module")
def ccfio_ka30():
    cfg = WaveConfig(k=30.0, radius=1.0)
    n = 240
    op = assemble_ccfio(CIRCLE, cfg, "TM", n)
    b = np.stack([rhs(CIRCLE, PlaneWave.from_angle(a, polarization="TM"), cfg, n)
                  for a in np.linspace(0, 2 * np.pi, 8, endpoint=False)], axis=1)
    return cfg, op, b


def test_identity_has_rank_zero():
    dec = fs.decompose(0.5 * np.eye(12), 1e-3)
    assert dec.rank == 0 and dec.sigma_max == 0.0
    b = np.arange(12.0)
    assert np.allclose(fs.woodbury_solve(dec, b), 2 * b)


def test_full_retention_is_exact(ccfio_ka30):
    _, op, b = ccfio_ka30
    dec = fs.decompose(op, 0.0)
    c = op.matrix - 0.5 * np.eye(op.n)
    assert dec.rank == op.n
    assert np.linalg.norm(dec.low_rank() - c, 2) < 1e-12 * np.linalg.norm(c, 2)
    x = fs.woodbury_solve(dec, b)
    ref = np.linalg.solve(op.matrix, b)
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) < 1e-10


def test_filter_idempotent_at_full_retention(ccfio_ka30):
    _, op, _ = ccfio_ka30
    dec = fs.decompose(op, 0.0)
    again = fs.decompose(dec.reconstruct(), 0.0)
    assert again.rank == dec.rank
    assert np.allclose(again.low_rank(), dec.low_rank(), atol=1e-12)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_truncation_bound_and_residual_constant(ccfio_ka30, eps):
    _, op, b = ccfio_ka30
    dec = fs.decompose(op, eps)
    c = op.matrix - 0.5 * np.eye(op.n)
    assert np.linalg.norm(c - dec.low_rank(), 2) <= eps * np.linalg.norm(c, 2) * (1 + 1e-10)
    x = fs.woodbury_solve(dec, b)
    const = fs.residual_constant(op, x, b, eps)
    assert np.all(const < 100)


def test_rank_monotone_in_epsilon(ccfio_ka30):
    _, op, _ = ccfio_ka30
    ranks = [fs.decompose(op, e).rank for e in (3e-1, 1e-1, 1e-2, 1e-3, 0.0)]
    assert ranks == sorted(ranks)


def test_rank_invariant_under_cyclic_rotation():
    cfg = WaveConfig(k=25.0, radius=1.0)
    curve = Curve.ellipse(1.0, 0.6)
    n = 200
    a = assemble_ccfio(curve, cfg, "TE", n).matrix
    b = assemble_ccfio(curve, cfg, "TE", n, offset=2 * np.pi * 7 / n).matrix
    for eps in (1e-1, 1e-2):
        assert abs(fs.decompose(a, eps).rank - fs.decompose(b, eps).rank) <= 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=20), st.floats(0.0, 0.99))
def test_eps_rank_counts_above_threshold(values, eps):
    s = np.sort(np.asarray(values))[::-1]
    r = fs.eps_rank(s, eps)
    if s[0] == 0:
        assert r == 0
    else:
        assert r == np.sum(s > eps * s[0])


def test_decompose_validation():
    with pytest.raises(ValueError):
        fs.decompose(np.eye(3), 1.0)
    with pytest.raises(ValueError):
        fs.decompose(np.ones((2, 3)), 0.1)
    with pytest.raises(ValueError):
        fs.decompose(np.array([[np.nan]]), 0.1)


def test_core_singularity_is_reported():
    # C = -I/2 makes the operator singular and the Woodbury core I - I = 0
    with pytest.raises(fs.CoreSingularError):
        fs.woodbury_solve(fs.decompose(np.zeros((4, 4)), 0.0), np.ones(4))


def test_estimator_interface(ccfio_ka30):
    _, op, b = ccfio_ka30
    est = fs.FilteredDirectSolver(epsilon=1e-2)
    assert est.get_params() == {"epsilon": 1e-2, "base": 0.5}
    with pytest.raises(RuntimeError):
        est.solve(b)
    est.fit(op)
    assert est.rank_ == est.decomposition_.rank and est.n_features_in_ == op.n
    assert 0 < est.core_rcond_ <= 1
    x = est.predict(b)
    assert np.allclose(x[:, 0], est.solve(b[:, 0]))
    ref, _ = solve_dense(op, b[:, 0])
    assert np.linalg.norm(x[:, 0] - ref) / np.linalg.norm(ref) < 0.1
    with pytest.raises(ValueError):
        est.solve(np.ones(3))
    with pytest.raises(ValueError):
        est.solve(np.full(op.n, np.inf))
    clone = est.set_params(epsilon=0.0).fit(op)
    assert np.allclose(clone.solve(b), np.linalg.solve(op.matrix, b), rtol=1e-9)


def test_rank_sweep_validation():
    cfg = WaveConfig(k=1.0, radius=1.0)
    with pytest.raises(ValueError, match="need ≥ 4 frequencies"):
        fs.rank_sweep(CIRCLE, cfg, "TM", [5, 10, 20], 1e-2)
    with pytest.raises(ValueError):
        fs.rank_sweep(CIRCLE, cfg, "TM", [5, 10, 8, 20], 1e-2)
    with pytest.raises(ValueError):
        fs.rank_sweep(CIRCLE, cfg, "TM", [10, 11, 12, 13], 1e-2)


def test_rank_sweep_small_and_csv(tmp_path):
    cfg = WaveConfig(k=1.0, radius=1.0)
    rows = fs.rank_sweep(CIRCLE, cfg, "TM", [5.0, 7.0, 10.0, 14.0], 1e-2)
    assert [r.n for r in rows] == [fs.sweep_nodes(CIRCLE, r.k) for r in rows]
    assert all(0 < r.r_eps <= r.n for r in rows)
    path = tmp_path / "sweep.csv"
    fs.write_sweep_csv(path, rows, label="circle TM")
    table = list(csv.DictReader(line for line in open(path) if not line.startswith("#")))
    assert list(table[0]) == ["k", "n", "r_eps", "sigma_max", "fit_exponent_partial", "wall_time_s"]
    assert table[0]["fit_exponent_partial"] == ""
    assert float(table[-1]["fit_exponent_partial"]) == pytest.approx(
        fs.fit_exponent([r.k for r in rows], [r.r_eps for r in rows]))
    with pytest.raises(ValueError):
        fs.RankSweepRow(1.0, 4, 5, 1.0, 0.0)


def test_fit_exponent_recovers_power_law():
    ks = np.array([50.0, 100.0, 200.0, 400.0])
    assert fs.fit_exponent(ks, 7 * ks ** (1 / 3)) == pytest.approx(1 / 3, rel=1e-12)
    assert math.isnan(fs.fit_exponent([1.0], [1.0]))


def test_sweep_nodes_even_and_proportional():
    assert fs.sweep_nodes(CIRCLE, 50.0) == 400
    assert fs.sweep_nodes(CIRCLE, 50.3) % 2 == 0


def test_glancing_band_energy_for_band_limited_vectors():
    n, ka = 256, 40
    t = 2 * np.pi * np.arange(n) / n
    inside = np.exp(1j * ka * t) / np.sqrt(n)
    outside = np.exp(3j * t) / np.sqrt(n)
    dec = fs.FilteredDecomposition(np.zeros((n, 2)), np.conj(np.stack([inside, outside])),
                                   0.1, np.ones(2))
    energy = fs.glancing_band_energy(dec, ka)
    assert energy == pytest.approx([1.0, 0.0], abs=1e-12)
