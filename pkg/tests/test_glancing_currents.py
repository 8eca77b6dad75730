import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, special

from glancing import circle_oracle, glancing_currents as gc
from glancing.geometry import Curve, fock_halfwidth, glancing_points
from glancing.operators import PlaneWave, WaveConfig

CIRCLE = Curve.circle(1.0)


class _Pt:
    def __init__(self, normal):
        self.normal = np.asarray(normal, float)


def test_lit_gate_cases():
    p = np.array([1.0, 0.0])
    assert gc.lit_gate(p, _Pt([-1.0, 0.0])) == 1
    assert gc.lit_gate(p, _Pt([1.0, 0.0])) == 0
    assert gc.lit_gate(p, _Pt([0.0, 1.0])) == 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_lit_gate_matches_sign(a, b):
    p = np.array([math.cos(a), math.sin(a)])
    n = np.array([math.cos(b), math.sin(b)])
    assert gc.lit_gate(p, _Pt(n)) == int(p @ n <= 0)


def _arc_with_pn(curve, wave, pn_target):
    """Arc lengths on the circle where p.n takes the given values (lit or shadow)."""
    phi = math.atan2(wave.direction[1], wave.direction[0])
    return np.mod(phi + np.arccos(np.asarray(pn_target)), 2 * np.pi)


def test_po_rhs_gate_limit_deep_lit_and_shadow():
    cfg = WaveConfig(k=200.0, radius=1.0)
    wave = PlaneWave((1.0, 0.0), 2.0, "TM")
    s = np.array([math.pi, 0.0])  # p.n = -1 and +1
    val = gc.po_rhs(CIRCLE, wave, cfg, s, gate_limit=True)
    assert val[0] == pytest.approx(2.0 * np.exp(1j * 200.0 * -1.0), rel=1e-13)
    assert val[1] == 0
    exact = gc.po_rhs(CIRCLE, wave, cfg, s)
    assert abs(exact[0] - val[0]) < 0.02 * abs(val[0])
    assert abs(exact[1]) < 0.02 * abs(val[0])


def test_po_rhs_warns_inside_fock_region():
    cfg = WaveConfig(k=100.0, radius=1.0)
    wave = PlaneWave((1.0, 0.0), 1.0, "TE")
    with pytest.warns(gc.FockRegionWarning):
        gc.po_rhs(CIRCLE, wave, cfg, [math.pi / 2 + 0.01])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gc.po_rhs(CIRCLE, wave, cfg, [math.pi])


@pytest.mark.parametrize("pol", ["TM", "TE"])
def test_po_bracket_deviation_scales_with_delta(pol):
    # deviation from 2 Pi_L behaves like delta / (p.n)^2
    k = 200.0
    wave = PlaneWave((1.0, 0.0), 1.0, pol)
    pn = np.array([-0.9, -0.6, -0.3, 0.3, 0.6, 0.9])
    s = _arc_with_pn(CIRCLE, wave, pn)
    gate = 2.0 * (pn <= 0)
    devs = []
    for scale in (1.0, 2.0):
        cfg = WaveConfig(k=k, radius=1.0, k_i_scale=scale)
        bracket = gc.po_rhs(CIRCLE, wave, cfg, s) / gc.po_form(CIRCLE, wave, cfg, s)
        devs.append(np.abs(bracket - gate))
        delta = cfg.k_i() / k
        assert np.all(devs[-1] * pn ** 2 < 2 * delta)
    assert np.all(np.abs(devs[1] / devs[0] - 2.0) < 0.3 * 2.0)


def test_fock_profile_limits_and_validation():
    psi = np.linspace(-6, 6, 49)
    tm = gc.fock_profile("TM", psi)
    te = gc.fock_profile("TE", psi)
    # lit side (psi < 0): |I^TM| -> -psi (physical-optics plateau), |I^TE| -> 1
    assert abs(tm.values[0]) == pytest.approx(6.0, rel=0.01)
    assert abs(te.values[0]) == pytest.approx(1.0, rel=0.01)
    # shadow side decays below 5% of the peak at the window edge
    for prof in (tm, te):
        mag = np.abs(prof.values)
        assert mag[-1] < 0.05 * mag.max()
        assert np.all(np.diff(mag[psi >= 2]) < 0)
    mid = np.searchsorted(psi, 0.0)
    assert abs(abs(tm.values[mid]) - abs(te.values[mid])) > 0.1 * abs(te.values[mid])
    with pytest.raises(ValueError):
        gc.fock_profile("TM", [7.0])
    with pytest.raises(ValueError):
        gc.fock_profile("XX", [0.0])


def test_fock_profile_doubling_converged():
    psi = np.array([-3.0, 0.0, 2.0])
    prof = gc.fock_profile("TM", psi, tol=1e-5)
    again = gc._profile_at("TM", psi, 2 * prof.truncation)
    assert np.max(np.abs(again - prof.values)) < 1e-5


def _rotated_profile(polarization, psi):
    """Independent oracle: the lit half-line is rotated onto x = -r e^{-i pi/6},
    where 1/W decays like exp(-(2/3) r^(3/2) sin(pi/4)); the zeros of
    Ai - iBi and Ai' - iBi' lie on arg x = pi/3, outside the swept sector."""
    rot = np.exp(-1j * np.pi / 6)

    def weight(x):
        ai, aip, bi, bip = special.airy(x)
        return np.exp(1j * psi * x) / (ai - 1j * bi if polarization == "TM" else aip - 1j * bip)

    def quad_c(f, a, b):
        re = integrate.quad(lambda u: f(u).real, a, b, limit=400, epsabs=1e-12)[0]
        im = integrate.quad(lambda u: f(u).imag, a, b, limit=400, epsabs=1e-12)[0]
        return re + 1j * im

    right = quad_c(lambda x: weight(x), 0.0, 16.0)
    left = quad_c(lambda r: weight(-r * rot) * rot, 0.0, 60.0)
    return (right + left) / (2 * np.pi)


@pytest.mark.parametrize("pol", ["TM", "TE"])
@pytest.mark.parametrize("psi", [-4.0, -1.0, 0.0, 1.5, 4.0])
def test_fock_profile_against_rotated_contour(pol, psi):
    ref = _rotated_profile(pol, psi)
    got = gc.fock_profile(pol, [psi]).values[0]
    assert abs(got - ref) < 1e-4 * max(1.0, abs(ref))


def test_fock_profile_invalid_values():
    with pytest.raises(ValueError):
        gc.FockProfile(np.zeros(1), np.array([np.nan]), "TM", 1.0)


@pytest.mark.parametrize("pol", ["TM", "TE"])
def test_fock_current_prefactor_scaling(pol):
    # at fixed psi the modulus scales as k^(-1/3) (TM) or stays constant (TE)
    amps = []
    for k in (100.0, 800.0):
        cfg = WaveConfig(k=k, radius=1.0)
        t = np.array([-2.0, 0.0, 1.0]) / (k / 2) ** (1 / 3)
        tr = gc.fock_current(CIRCLE, PlaneWave((1.0, 0.0)), cfg, pol, t)
        amps.append(np.abs(tr.values))
    expect = 8 ** (-1 / 3) if pol == "TM" else 1.0
    assert np.allclose(amps[1] / amps[0], expect, rtol=1e-10)


def test_fock_current_carrier_and_orientation():
    k = 120.0
    cfg = WaveConfig(k=k, radius=1.0)
    wave = PlaneWave((1.0, 0.0))
    t = np.linspace(-0.2, 0.2, 9)
    tr = gc.fock_current(CIRCLE, wave, cfg, "TM", t)
    s0 = tr.meta["s0"]
    assert s0 == pytest.approx(3 * math.pi / 2, abs=1e-12)
    assert np.all(np.diff(tr.s) > 0) and np.all((tr.s >= 0) & (tr.s < CIRCLE.length))
    # p.n < 0 (lit) at t < 0
    pt = CIRCLE.at_arclength(s0 - 0.1)
    assert pt.normal @ wave.p < 0
    tt = tr.meta["t"]
    psi = (k / 2) ** (1 / 3) * tt
    prof = gc.fock_profile("TM", psi).values
    pos = CIRCLE.at_arclength(s0).position @ wave.p
    expect = 2 * (2 / k) ** (1 / 3) * np.exp(1j * k * pos) * np.exp(1j * k * tt) * prof
    assert np.allclose(tr.values, expect, rtol=1e-12)


@pytest.mark.parametrize("pol", ["TM", "TE"])
def test_reference_profile_is_frequency_invariant(pol):
    # the exact circle current divided by the carrier, at fixed psi, is
    # k-independent (after the TM prefactor) within 10% across an octave
    psi = np.linspace(-3, 3, 13)
    profs = []
    for k in (80.0, 160.0):
        cfg = WaveConfig(k=k, radius=1.0)
        wave = PlaneWave((1.0, 0.0), 1.0, pol)
        s0 = 3 * math.pi / 2
        t = psi / (k / 2) ** (1 / 3)
        ref = circle_oracle.mie_current_at(1.0, wave, cfg, s0 + t)
        carrier = np.exp(1j * k * math.cos(s0)) * np.exp(1j * k * t)
        pref = 2 * (2 / k) ** (1 / 3) if pol == "TM" else 2.0
        profs.append(np.abs(ref / carrier / pref))
    assert np.max(np.abs(profs[1] - profs[0]) / np.abs(profs[0])) < 0.10


@pytest.mark.parametrize("pol", ["TM", "TE"])
def test_circle_fock_current_error_bound(pol):
    k = 80.0
    cfg = WaveConfig(k=k, radius=1.0)
    wave = PlaneWave.from_angle(0.7, polarization=pol)
    half = fock_halfwidth(CIRCLE, 0.0, k)
    t = np.linspace(-half, half, 201)
    approx = gc.fock_current(CIRCLE, wave, cfg, pol, t)
    ref = circle_oracle.mie_current_at(1.0, wave, cfg, approx.s)
    assert gc.relative_l2(approx.values, ref) < 0.15


def _valid_width(k, pol, bound=0.15):
    cfg = WaveConfig(k=k, radius=1.0)
    wave = PlaneWave((1.0, 0.0), 1.0, pol)

    def err(w):
        t = np.linspace(-w, w, 301)
        a = gc.fock_current(CIRCLE, wave, cfg, pol, t)
        return gc.relative_l2(a.values, circle_oracle.mie_current_at(1.0, wave, cfg, a.s)) - bound

    return optimize.brentq(err, 0.5 * k ** (-1 / 3), 6 / (k / 2) ** (1 / 3), xtol=1e-4)


@pytest.mark.parametrize("pol", ["TM", "TE"])
def test_valid_width_shrinks_like_cube_root(pol):
    ratio = _valid_width(160.0, pol) / _valid_width(80.0, pol)
    assert ratio == pytest.approx(2 ** (-1 / 3), rel=0.2)


def test_ellipse_fock_current_against_nystrom():
    curve = Curve.ellipse(1.0, 0.5)
    k = 40 * 2 * math.pi / curve.length
    cfg = WaveConfig(k=k, k_i_rule="curvature_local")
    wave = PlaneWave.from_angle(math.pi / 2, polarization="TE")
    s0 = next(s for s, b in glancing_points(curve, wave.p) if b == 1)
    half = fock_halfwidth(curve, s0, k)
    approx = gc.fock_current(curve, wave, cfg, "TE", np.linspace(-half, half, 121))
    ref = gc.nystrom_current(curve, wave, cfg, approx.s)
    assert gc.relative_l2(approx.values, ref) < 0.15


def test_nystrom_current_matches_mie():
    cfg = WaveConfig(k=30.0, radius=1.0)
    wave = PlaneWave.from_angle(1.1, polarization="TM")
    s = np.linspace(0.1, 6.0, 37)
    ref = circle_oracle.mie_current_at(1.0, wave, cfg, s)
    got = gc.nystrom_current(CIRCLE, wave, cfg, s)
    assert gc.relative_l2(got, ref) < 1e-8
    assert gc.reference_nodes(CIRCLE, 30.0) == 512
    assert gc.reference_nodes(CIRCLE, 100.0) % 2 == 0


def test_trig_interpolate_exact_for_band_limited():
    n = 32
    t = 2 * np.pi * np.arange(n) / n
    f = lambda x: np.exp(3j * x) + 0.5 * np.cos(16 * x) + 2
    x = np.array([0.123, 1.7, 5.5])
    assert np.allclose(gc.trig_interpolate(f(t), n, x), f(x), atol=1e-12)


def test_trace_csv(tmp_path):
    s = np.linspace(0, 1, 5)
    a = circle_oracle.CurrentTrace(s, np.arange(5) * 1j, "reference", "TM")
    b = circle_oracle.CurrentTrace(s, np.ones(5, complex), "approximation", "TM")
    path = tmp_path / "c.csv"
    gc.write_trace_csv(path, a, b, s < 0.5)
    rows = list(csv.DictReader(line for line in open(path) if not line.startswith("#")))
    assert list(rows[0]) == ["s", "re_ref", "im_ref", "re_approx", "im_approx", "in_fock_window"]
    assert rows[3]["im_ref"] == "3.0" and rows[3]["in_fock_window"] == "0"
    c = circle_oracle.CurrentTrace(s + 0.1, np.ones(5), "approximation", "TM")
    with pytest.raises(ValueError):
        gc.write_trace_csv(path, a, c, s < 0.5)
