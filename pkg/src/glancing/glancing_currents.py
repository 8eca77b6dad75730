"""Physical-optics right-hand sides and Fock-region surface currents.

Orientation convention
----------------------
Around the glancing point s0 (where p.n(s0) = 0 and p.tau(s0) > 0) the
offset t is measured along the tangent tau, i.e. in the direction of
increasing arc length.  Since p.n(s0 + t) ~ kappa t (p.tau), the shadow lies
at t > 0 and the lit side at t < 0.  The Fock profiles I(psi) are used with
psi = (k kappa^2 / 2)^(1/3) t exactly as written in the current formulas, so
psi < 0 is the lit side, where |I^TM| approaches the physical-optics plateau,
and psi > 0 is the shadow, where the profiles decay.

TE sign
-------
The TE currents in this package follow J_t = -H_z(total), the convention of
the TE CCFIE solved in :mod:`glancing.operators` and of the Mie series.  The
Fock TE formula is written for the opposite orientation, so
:func:`fock_current` multiplies J_t,G by -1.  This is a single global sign;
the TM current needs none.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .circle_oracle import CurrentTrace
from .geometry import fock_halfwidth, glancing_points
from .operators import Discretization, assemble_ccfio, rhs, solve_dense
from .symbols import root_k2_minus_xi2


class FockProfileConvergenceError(ArithmeticError):
    pass


class FockRegionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FockProfile:
    psi: np.ndarray
    values: np.ndarray
    polarization: str
    truncation: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Fock profile values must be finite")


def lit_gate(p, pt):
    """1 if p.n <= 0 (illuminated, including the tangency point), else 0."""
    return 1 if float(np.dot(p, pt.normal)) <= 0.0 else 0


# -- physical-optics right-hand side -------------------------------------------


def _po_bracket(polarization, pn, pt_tau, k, kt):
    xi_t = k * pt_tau
    root = root_k2_minus_xi2(kt, xi_t)
    if polarization == "TM":
        return 1.0 - root / (kt * pn)
    return 1.0 - kt * pn / root


def po_rhs(curve, wave, config, s, gate_limit=False):
    """Approximate preconditioned CCFIE right-hand side at arc length(s) ``s``.

    TM: -(E0/2 eta) e^{ik p.gamma} (p.n) [1 - sqrt(k~^2 - xi_T^2) / (k~ p.n)]
    TE: -i(E0/2 eta) e^{ik p.gamma} [1 - k~ p.n / sqrt(k~^2 - xi_T^2)]
    with xi_T = k p.tau.  ``gate_limit=True`` replaces the bracket by its
    delta -> 0 limit 2 Pi_L.  Values inside a Fock region raise a warning.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    p = np.asarray(wave.direction, dtype=float)
    k, eta, e0 = config.k, config.eta, wave.amplitude
    pt = curve.at_arclength(s)
    pn = pt.normal @ p
    ptau = pt.tangent @ p
    for s0, _ in glancing_points(curve, p):
        d = np.abs((s - s0 + 0.5 * curve.length) % curve.length - 0.5 * curve.length)
        if np.any(d < fock_halfwidth(curve, s0, k)):
            warnings.warn("po_rhs evaluated inside a Fock region", FockRegionWarning, stacklevel=2)
            break
    if config.k_i_rule == "curvature_local":
        kt = k + 1j * np.array([config.k_i(c) for c in pt.curvature])
    else:
        kt = config.k_tilde()
    if gate_limit:
        bracket = 2.0 * (pn <= 0)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            bracket = _po_bracket(wave.polarization, pn, ptau, k, kt)
    carrier = np.exp(1j * k * (pt.position @ p))
    if wave.polarization == "TM":
        out = -(e0 / (2.0 * eta)) * carrier * pn * bracket
    else:
        out = -0.5j * (e0 / eta) * carrier * bracket
    return out


def po_form(curve, wave, config, s):
    """The prefactor of :func:`po_rhs` without the bracket (bracket := 1)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    p = np.asarray(wave.direction, dtype=float)
    pt = curve.at_arclength(s)
    carrier = np.exp(1j * config.k * (pt.position @ p))
    if wave.polarization == "TM":
        return -(wave.amplitude / (2.0 * config.eta)) * carrier * (pt.normal @ p)
    return -0.5j * (wave.amplitude / config.eta) * carrier * np.ones_like(s)


# -- Fock profiles ---------------------------------------------------------------

_X_POSITIVE = 16.0
_X_START = 128.0
_X_MAX = 8192.0
_CHUNK = 200_000


def _smooth_taper(u):
    """C-infinity ramp: 0 at u <= 0, 1 at u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def _profile_at(polarization, psi, x_trunc):
    rate = np.max(np.abs(psi)) + np.sqrt(x_trunc) + 1.0
    h = 0.4 / rate
    n = int(np.ceil((x_trunc + _X_POSITIVE) / h))
    x = np.linspace(-x_trunc, _X_POSITIVE, n + 1)
    h = x[1] - x[0]
    ai, aip, bi, bip = special.airy(x)
    denom = ai - 1j * bi if polarization == "TM" else aip - 1j * bip
    # taper over the outer 20% of the lit-side range
    weight = _smooth_taper((x + x_trunc) / (0.2 * x_trunc)) * h / denom
    weight[0] *= 0.5
    weight[-1] *= 0.5
    out = np.empty(psi.size, dtype=complex)
    step = max(1, _CHUNK // x.size)
    for i in range(0, psi.size, step):
        out[i:i + step] = np.exp(1j * np.outer(psi[i:i + step], x)) @ weight
    return out / (2.0 * np.pi)


def fock_profile(polarization, psi_grid, tol=1e-4):
    """I^TM(psi) or I^TE(psi) = (1/2 pi) int e^{i psi x} / W(x) dx.

    W = Ai - iBi (TM) or Ai' - iBi' (TE).  The integral is truncated on the
    lit (x < 0) side with a smooth taper over the outer 20% of the range; the
    truncation is doubled until successive results agree to ``tol``
    (absolute), otherwise :class:`FockProfileConvergenceError` is raised.
    """
    if polarization not in ("TM", "TE"):
        raise ValueError("polarization must be 'TM' or 'TE'")
    psi = np.asarray(psi_grid, dtype=float)
    if np.any(np.abs(psi) > 6.0):
        raise ValueError("psi must lie in [-6, 6]")
    x_trunc = max(_X_START, 4.0 * float(np.max(np.abs(psi), initial=0.0)) ** 2)
    prev = _profile_at(polarization, psi.ravel(), x_trunc)
    while True:
        x_trunc *= 2.0
        cur = _profile_at(polarization, psi.ravel(), x_trunc)
        if np.max(np.abs(cur - prev), initial=0.0) < tol:
            return FockProfile(psi.copy(), cur.reshape(psi.shape), polarization, x_trunc)
        if x_trunc >= _X_MAX:
            raise FockProfileConvergenceError(
                f"Fock profile doubling test failed at truncation {x_trunc}")
        prev = cur


def fock_current(curve, wave, config, polarization, t_grid):
    """Fock-region current J_z,G (TM) or J_t,G (TE) on s0 + t_grid.

    J_z,G = (2E0/eta) (2 kappa/k)^(1/3) e^{ik p.gamma(s0)} e^{ikt} I^TM(psi)
    J_t,G = -(2E0/eta) e^{ik p.gamma(s0)} e^{ikt} I^TE(psi)
    with psi = (k kappa^2 / 2)^(1/3) t and s0 the glancing point with
    p.tau(s0) > 0.  Samples are returned sorted by arc length in [0, L).
    """
    t = np.asarray(t_grid, dtype=float)
    p = np.asarray(wave.direction, dtype=float)
    k, eta, e0 = config.k, config.eta, wave.amplitude
    s0 = next(s for s, branch in glancing_points(curve, p) if branch == 1)
    pt0 = curve.at_arclength(s0)
    kappa = float(pt0.curvature)
    psi = (k * kappa ** 2 / 2.0) ** (1.0 / 3.0) * t
    prof = fock_profile(polarization, psi)
    carrier = np.exp(1j * k * float(pt0.position @ p)) * np.exp(1j * k * t)
    amp = 2.0 * e0 / eta
    if polarization == "TM":
        amp *= (2.0 * kappa / k) ** (1.0 / 3.0)
    else:
        amp = -amp  # J_t = -H_z(total) orientation, see module notes
    values = amp * carrier * prof.values
    s = np.mod(s0 + t, curve.length)
    order = np.argsort(s, kind="stable")
    return CurrentTrace(s[order], values[order], "approximation", polarization,
                        {"k": k, "curve": curve.to_dict(), "direction": tuple(p),
                         "s0": s0, "kappa0": kappa, "t": t[order]})


# -- reference currents and comparison --------------------------------------------


def trig_interpolate(values, t_nodes_count, t):
    """Evaluate the trigonometric interpolant of equispaced samples at ``t``."""
    n = t_nodes_count
    c = np.fft.fft(values) / n
    q = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        c = c.copy()
        half = c[n // 2] / 2.0
        c[n // 2] = half
        c = np.append(c, half)
        q = np.append(q, n // 2)
        q[n // 2] = -n // 2
    return np.exp(1j * np.outer(np.asarray(t, dtype=float), q)) @ c


def reference_nodes(curve, k):
    """Node count max(16 kL/(2 pi), 512), rounded up to an even number."""
    n = max(int(np.ceil(16.0 * k * curve.length / (2.0 * np.pi))), 512)
    return n + n % 2


def nystrom_current(curve, wave, config, s, n=None):
    """Reference current from a dense CCFIE solve, evaluated at arc lengths ``s``.

    The nodal solution is interpolated trigonometrically in the curve
    parameter, which is spectrally accurate for the smooth current.
    """
    n = n or reference_nodes(curve, config.k)
    disc = Discretization(curve, n)
    opm = assemble_ccfio(curve, config, wave.polarization, n, disc=disc)
    x, _ = solve_dense(opm, rhs(curve, wave, config, n, disc=disc))
    t = curve.param_of_arclength(np.asarray(s, dtype=float))
    return trig_interpolate(x, n, t)


def relative_l2(approx, ref):
    approx, ref = np.asarray(approx), np.asarray(ref)
    return float(np.linalg.norm(approx - ref) / np.linalg.norm(ref))


def write_trace_csv(path, reference: CurrentTrace, approximation: CurrentTrace, window):
    """Write a reference/approximation pair sampled on the same arc grid.

    ``window`` is a boolean array marking samples inside the Fock window.
    """
    if not np.array_equal(reference.s, approximation.s):
        raise ValueError("traces must share their arc-length samples")
    with open(path, "w", newline="") as fh:
        fh.write("# schema=v1 surface currents\n")
        fh.write(f"# polarization={reference.polarization}\n")
        w = csv.writer(fh)
        w.writerow(["s", "re_ref", "im_ref", "re_approx", "im_approx", "in_fock_window"])
        for s, r, a, flag in zip(reference.s, reference.values, approximation.values, window):
            w.writerow([repr(float(s)), repr(float(r.real)), repr(float(r.imag)),
                        repr(float(a.real)), repr(float(a.imag)),
                        int(bool(flag))])
