"""Exact results on the circle of radius a.

Eigenvalues of the four boundary operators acting on e^{i q theta}:

    lambda_S(q) =  i pi a / 2       J_q(ka) H_q(ka)
    lambda_D(q) =  i pi a k / 4    (J_q H_q)'(ka)
    lambda_N(q) = -i pi a k^2 / 2   J_q'(ka) H_q'(ka)

(primes are derivatives in the argument), and the Mie-series surface
currents of a perfectly conducting cylinder under plane-wave incidence.
Bessel values come from :func:`glancing.specfun.jy_orders`; above the turning
point, where Y_q overflows, the products are propagated as logarithms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import jy_orders

_EXTREME = 1e150


@dataclass(frozen=True)
class CircleEigenTable:
    radius: float
    k: complex
    q: np.ndarray
    lam_s: np.ndarray
    lam_d: np.ndarray
    lam_n: np.ndarray

    @property
    def ka(self):
        return self.k * self.radius

    def lookup(self, q):
        """Eigenvalues (S, D, N) for integer indices of either sign."""
        idx = np.abs(np.asarray(q, dtype=int))
        return self.lam_s[idx], self.lam_d[idx], self.lam_n[idx]

    def calderon_residual(self):
        """|lam_S lam_N - (1/4 - lam_D^2)| / |lam_S lam_N| for every q."""
        lhs = self.lam_s * self.lam_n
        return np.abs(lhs - (0.25 - self.lam_d ** 2)) / np.abs(lhs)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# schema=v1 circle eigenvalues\n")
            fh.write(f"# radius={self.radius} k={self.k}\n")
            w = csv.writer(fh)
            w.writerow(["q", "S_re", "S_im", "D_re", "D_im", "N_re", "N_im"])
            for row in zip(self.q, self.lam_s, self.lam_d, self.lam_n):
                q, s, d, n = row
                w.writerow([int(q)] + [repr(float(v)) for z in (s, d, n) for v in (z.real, z.imag)])


def _ratio_tail(z, q_lo, q_hi, j_prev, y_prev):
    """Log-magnitude continuation of J_q and Y_q for q in (q_lo, q_hi]."""
    m = q_hi + 60 + int(10 * abs(z) ** (1 / 3))
    mu = np.zeros(m + 2, dtype=complex)
    for q in range(m, 0, -1):
        mu[q] = 1.0 / (2.0 * q / z - mu[q + 1])   # J_q / J_{q-1}
    n = q_hi - q_lo
    log_j = np.empty(n, dtype=complex)
    log_y = np.empty(n, dtype=complex)
    rho = np.empty(n + 1, dtype=complex)         # Y_q / Y_{q-1}
    lj, ly = np.log(complex(j_prev[1])), np.log(complex(y_prev[1]))
    rho_prev = y_prev[1] / y_prev[0]
    for i, q in enumerate(range(q_lo + 1, q_hi + 1)):
        r = 2.0 * (q - 1) / z - 1.0 / rho_prev
        lj += np.log(mu[q])
        ly += np.log(r)
        log_j[i], log_y[i], rho[i] = lj, ly, r
        rho_prev = r
    return log_j, log_y, mu[q_lo + 1:q_hi + 1], rho[:n]


def bessel_products(q_max, z):
    """Arrays of J_q H_q, (J_q H_q)' and J_q' H_q' for q = 0..q_max."""
    q_max = int(q_max)
    j, y = jy_orders(q_max + 1, z)
    zc = complex(z)
    bad = (~np.isfinite(y)) | (np.abs(y) > _EXTREME) | (np.abs(j) < 1 / _EXTREME)
    q = np.arange(q_max + 1)
    cut = int(np.argmax(bad)) if bad.any() else q_max + 2
    cut = max(cut, 2)
    jh = np.empty(q_max + 1, dtype=complex)
    djh = np.empty_like(jh)
    jphp = np.empty_like(jh)

    head = q[q < min(cut, q_max + 1)]
    if head.size:
        jq, yq = j[head], y[head]
        jm = np.where(head > 0, j[np.maximum(head - 1, 0)], -j[1])
        ym = np.where(head > 0, y[np.maximum(head - 1, 0)], -y[1])
        jp = jm - head / zc * jq
        yp = ym - head / zc * yq
        if head[0] == 0:
            jp[0], yp[0] = -j[1], -y[1]
        hq, hp = jq + 1j * yq, jp + 1j * yp
        jh[head] = jq * hq
        djh[head] = jp * hq + jq * hp
        jphp[head] = jp * hp

    if cut <= q_max:
        log_j, log_y, mu, rho = _ratio_tail(zc, cut - 1, q_max, j[cut - 2:cut], y[cut - 2:cut])
        tail = np.arange(cut, q_max + 1)
        dj = 1.0 / mu - tail / zc           # J'/J
        dy = 1.0 / rho - tail / zc          # Y'/Y
        jj = np.exp(2 * log_j)
        jy = np.exp(log_j + log_y)
        jh[tail] = jj + 1j * jy
        djh[tail] = 2 * jj * dj + 1j * jy * (dj + dy)
        jphp[tail] = jj * dj * dj + 1j * jy * dj * dy
    return jh, djh, jphp


def default_q_max(ka):
    ka = abs(ka)
    return int(math.ceil(ka + 40.0 * ka ** (1.0 / 3.0) + 50))


def eigenvalues(a, k, q_max=None):
    """Exact eigenvalues of S, D, N on the circle for q = 0..q_max."""
    if a <= 0:
        raise ValueError("radius must be positive")
    kc = complex(k)
    if q_max is None:
        q_max = max(default_q_max(kc * a), int(math.ceil(1.3 * abs(kc) * a)) + 100)
    ka = kc * a
    jh, djh, jphp = bessel_products(q_max, ka if ka.imag else ka.real)
    lam_s = 0.5j * np.pi * a * jh
    lam_d = 0.25j * np.pi * a * kc * djh
    lam_n = -0.5j * np.pi * a * kc ** 2 * jphp
    return CircleEigenTable(float(a), kc, np.arange(q_max + 1), lam_s, lam_d, lam_n)


def ccfio_eigenvalues(a, k, k_i, polarization, q_max=None):
    """Eigenvalues of the TM/TE CCFIO on the circle (k~ = k + i k_i)."""
    kt = k + 1j * k_i
    ek = eigenvalues(a, k, q_max)
    et = eigenvalues(a, kt, int(ek.q[-1]))
    if polarization == "TM":
        lam = (k / kt) * et.lam_n * ek.lam_s + (0.5 - et.lam_d) * (0.5 + ek.lam_d)
    elif polarization == "TE":
        lam = (kt / k) * et.lam_s * ek.lam_n + (0.5 + et.lam_d) * (0.5 - ek.lam_d)
    else:
        raise ValueError("polarization must be 'TM' or 'TE'")
    return ek.q, lam


# -- Mie series -------------------------------------------------------------------


@dataclass(frozen=True)
class CurrentTrace:
    s: np.ndarray
    values: np.ndarray
    label: str
    polarization: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s)
        if s.ndim != 1 or np.any(np.diff(s) <= 0):
            raise ValueError("current samples must be strictly increasing")


class SeriesConvergenceError(ArithmeticError):
    pass


def _hankel_orders(q_max, ka):
    j, y = jy_orders(q_max + 1, ka)
    if not np.all(np.isfinite(y)):
        raise SeriesConvergenceError("Y_q overflowed inside the truncated Mie series")
    h = j + 1j * y
    hp = np.empty(q_max + 1, dtype=complex)
    hp[0] = -h[1]
    qq = np.arange(1, q_max + 1)
    hp[1:] = h[:-2] - qq / ka * h[1:-1]
    return h[:q_max + 1], hp, j[:q_max + 1]


def mie_coefficients(a, k, polarization, q_max=None):
    """Per-order surface-current coefficients c_q, so that the current is
    (2 E0 / (pi k a eta)) * sum_q i^q c_q e^{i q (theta - phi_p)}."""
    ka = k * a
    q_max = q_max or default_q_max(ka)
    h, hp, _ = _hankel_orders(q_max, ka)
    c = 1.0 / h if polarization == "TM" else 1.0 / hp
    total = abs(c[0]) + 2 * np.sum(np.abs(c[1:]))
    if abs(c[-1]) > 1e-12 * total:
        raise SeriesConvergenceError(f"Mie series tail {abs(c[-1]):.2e} too large at q_max={q_max}")
    return c


def mie_current_at(a, wave, config, s):
    """Mie-series surface current at arbitrary arc lengths ``s`` on the circle."""
    k, eta, e0 = config.k, config.eta, wave.amplitude
    ka = k * a
    c = mie_coefficients(a, k, wave.polarization)
    theta = np.asarray(s, dtype=float) / a
    phi_p = math.atan2(wave.direction[1], wave.direction[0])
    q = np.arange(1, c.size)
    series = c[0] + 2.0 * (np.cos(np.multiply.outer(theta - phi_p, q)) @ ((1j ** q) * c[1:]))
    return (2.0 * e0 / (np.pi * ka * eta)) * series


def mie_current(a, wave, config, samples):
    """Surface current on a PEC circle: J_z (TM) or J_t (TE).

    Samples are uniform in arc length on [0, 2 pi a).  The TE current is
    J_t = -H_z(total), matching the sign convention of the TE CCFIE.
    """
    s = a * 2.0 * np.pi * np.arange(samples) / samples
    values = mie_current_at(a, wave, config, s)
    return CurrentTrace(s, values, "reference", wave.polarization,
                        {"k": config.k, "curve": {"kind": "circle", "radius": a},
                         "direction": wave.direction})


def optical_theorem(a, k, polarization):
    """(extinction, scattering) widths from the Mie coefficients.

    Energy conservation for a lossless scatterer makes them equal.
    """
    ka = k * a
    q_max = default_q_max(ka)
    h, hp, j = _hankel_orders(q_max, ka)
    if polarization == "TM":
        b = -j / h
    else:
        jp = np.empty_like(j)
        jj, _ = jy_orders(q_max + 1, ka)
        jp[0] = -jj[1]
        qq = np.arange(1, q_max + 1)
        jp[1:] = jj[:-2] - qq / ka * jj[1:-1]
        b = -jp / hp
    mult = np.full(q_max + 1, 2.0)
    mult[0] = 1.0
    extinction = -(4.0 / k) * np.sum(mult * b.real)
    scattering = (4.0 / k) * np.sum(mult * np.abs(b) ** 2)
    return float(extinction), float(scattering)
