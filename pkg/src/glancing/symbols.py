"""Operator symbols: principal, glancing (Airy/Fock transition) and windowed.

Conventions
-----------
* xi is the spectral variable along the curve (xi = 2 pi q / L).
* sqrt(k^2 - xi^2) is taken on the branch continued from Im k > 0: positive
  real for |xi| < k and +i sqrt(xi^2 - k^2) for |xi| > k.
* Glancing variables:  K = (k - xi) 24^(1/3) k^(-1/3) kappa^(-2/3),
  x = -K / 12^(1/3).  For complex k (the complexified wavenumber) the same
  expressions are continued analytically, which gives the x~ variable.
* The negative branch xi ~ -k is obtained by the reflection xi -> -xi.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .specfun import airy_array, fock_f

SYMBOL_KINDS = ("S", "D", "Dstar", "N")
FORMS = ("principal", "glancing_F", "glancing_Airy", "glancing_asymptotic", "windowed_numeric")
C24 = 24.0 ** (1.0 / 3.0)
C12 = 12.0 ** (1.0 / 3.0)
_FOCK_PREFIX = np.exp(0.25j * np.pi) / (2.0 * np.sqrt(np.pi))
DEFAULT_WINDOW_C = 6.0
DEFAULT_EPS_C = 10.0


class BranchPointError(ValueError):
    pass


class GlancingWindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpectralPoint:
    xi: float
    k: float
    kappa: float
    q: int | None = None
    s: float = 0.0

    @classmethod
    def from_index(cls, q, length, k, kappa, s=0.0):
        return cls(2.0 * np.pi * q / length, k, kappa, q, s)

    @classmethod
    def on_curve(cls, curve, q, s, k):
        kappa = float(curve.at_arclength(s).curvature)
        return cls.from_index(q, curve.length, k, kappa, s)


@dataclass(frozen=True)
class ScaledGlancingVars:
    K: float
    x: float
    x_tilde: complex


@dataclass(frozen=True)
class SymbolValue:
    value: complex
    form: str

    def __complex__(self):
        return complex(self.value)


def _check_kind(kind):
    if kind not in SYMBOL_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")


def root_k2_minus_xi2(k, xi):
    """sqrt(k^2 - xi^2) on the limiting-absorption branch (Im >= 0)."""
    w = np.sqrt(np.asarray(k, dtype=complex) ** 2 - np.asarray(xi, dtype=float) ** 2)
    return np.where(w.imag < 0, -w, w)


def principal_value(kind, xi, k):
    """Array version of :func:`principal` (no branch-point check)."""
    _check_kind(kind)
    if kind in ("D", "Dstar"):
        return np.zeros(np.shape(xi), dtype=complex)
    root = root_k2_minus_xi2(k, xi)
    if kind == "S":
        return 0.5j / root
    return -0.5j * root


def principal(kind, xi, k):
    """Principal symbol; raises :class:`BranchPointError` for S at |xi| = k."""
    _check_kind(kind)
    if kind == "S" and complex(k).imag == 0 and abs(abs(xi) - complex(k).real) == 0:
        raise BranchPointError("single-layer principal symbol is singular at |xi| = k")
    return SymbolValue(complex(principal_value(kind, xi, k)), "principal")


# -- glancing symbols ----------------------------------------------------------


def fock_variable(xi, k, kappa):
    """K = (k - |xi|) 24^(1/3) k^(-1/3) kappa^(-2/3); complex k allowed."""
    kc = np.asarray(k, dtype=complex) if np.iscomplexobj(k) else np.asarray(k, dtype=float)
    return (kc - np.abs(xi)) * C24 * kc ** (-1.0 / 3.0) * kappa ** (-2.0 / 3.0)


def scaled_vars(xi, k, kappa, k_i=0.0):
    """K, x and the complexified x~ at a spectral point."""
    K = float(fock_variable(xi, k, kappa))
    x = -K / C12
    kt = k + 1j * k_i
    x_tilde = (k / kt) ** (1.0 / 3.0) * (x - 1j * k_i / (2.0 ** (-1.0 / 3.0) * k ** (1.0 / 3.0)
                                                           * kappa ** (2.0 / 3.0)))
    return ScaledGlancingVars(K, x, complex(x_tilde))


def glancing_airy_value(kind, xi, k, kappa):
    """Airy-form transition symbols (vectorised; complex k gives x~)."""
    _check_kind(kind)
    kc = np.asarray(k, dtype=complex)
    x = -fock_variable(xi, kc if np.any(kc.imag) else kc.real, kappa) / C12
    ai, aip, bi, bip = airy_array(x)
    w = ai - 1j * bi
    scale = (2.0 * kc ** 2 * kappa) ** (1.0 / 3.0)
    if kind == "S":
        return 1j * np.pi / scale * ai * w
    if kind in ("D", "Dstar"):
        return -0.5j * np.pi * (aip * w + ai * (aip - 1j * bip))
    return -1j * np.pi * scale * aip * (aip - 1j * bip)


def glancing_fock_value(kind, xi, k, kappa):
    """F-form transition symbols (scalar; complex k gives complex K)."""
    _check_kind(kind)
    kc = complex(k)
    K = complex(fock_variable(xi, kc if kc.imag else kc.real, kappa))
    fv = fock_f(K)
    scale = (kc ** 2 * kappa / np.sqrt(3.0)) ** (1.0 / 3.0)
    if kind == "S":
        return _FOCK_PREFIX / scale * fv.value
    if kind in ("D", "Dstar"):
        return _FOCK_PREFIX * np.sqrt(3.0) * fv.derivative1
    return -_FOCK_PREFIX * scale * (K * fv.value + 6.0 * fv.derivative2)


def in_glancing_window(xi, k, kappa, c=DEFAULT_WINDOW_C):
    return abs(k - abs(xi)) <= c * 24.0 ** (-1.0 / 3.0) * k ** (1.0 / 3.0) * kappa ** (2.0 / 3.0)


def glancing(kind, pt: SpectralPoint, form="Airy", window_c=DEFAULT_WINDOW_C):
    """Transition symbol at ``pt`` in the F (Fock integral) or Airy form."""
    _check_kind(kind)
    if not in_glancing_window(pt.xi, pt.k, pt.kappa, window_c):
        warnings.warn(f"xi={pt.xi} is outside the glancing window; accuracy degrades",
                      GlancingWindowWarning, stacklevel=2)
    if form == "Airy":
        return SymbolValue(complex(glancing_airy_value(kind, pt.xi, pt.k, pt.kappa)), "glancing_Airy")
    if form == "F":
        return SymbolValue(complex(glancing_fock_value(kind, pt.xi, pt.k, pt.kappa)), "glancing_F")
    raise ValueError("form must be 'F' or 'Airy'")


def glancing_asymptotic_value(kind, xi, k, kappa):
    """Large-|x| approximations of the transition symbols (vectorised)."""
    _check_kind(kind)
    xi = np.abs(np.asarray(xi, dtype=float))
    x = -np.asarray(fock_variable(xi, k, kappa)) / C12
    lit = xi < k
    d = np.abs(k - xi)
    osc = np.exp(1j * (4.0 / 3.0) * np.abs(x) ** 1.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "S":
            base = d ** -0.5 / np.sqrt(8.0 * k)
            return np.where(lit, base * (1j + osc), base + 0j)
        if kind in ("D", "Dstar"):
            return np.where(lit, 0.5j * osc,
                            np.sqrt(2.0) / 16.0 * kappa * np.sqrt(k) * d ** -1.5 + 0j)
        base = np.sqrt(k / 2.0) * d ** 0.5
        return np.where(lit, base * (-1j + osc), base + 0j)


def glancing_asymptotic(kind, pt: SpectralPoint):
    if abs(pt.k - abs(pt.xi)) == 0:
        raise BranchPointError("asymptotic glancing symbols are singular at xi = k")
    return SymbolValue(complex(glancing_asymptotic_value(kind, pt.xi, pt.k, pt.kappa)),
                       "glancing_asymptotic")


# -- Calderon combined operator -------------------------------------------------


def _k_i_at(config, kappa):
    if config.k_i_rule == "curvature_local":
        return float(config.k_i(kappa))
    return float(config.k_i())


def ccfio_symbol(polarization, pt: SpectralPoint, config, regime="principal", form="F"):
    """Symbol of the TM/TE CCFIO built from principal or glancing symbols.

    In the glancing regime the k~ constituents are evaluated at complex k~,
    i.e. at x~, through the Fock integral (``form="F"``) or complex-argument
    Airy functions (``form="Airy"``).
    """
    if polarization not in ("TM", "TE"):
        raise ValueError("polarization must be 'TM' or 'TE'")
    k = pt.k
    kt = k + 1j * _k_i_at(config, pt.kappa)
    if regime == "principal":
        def sym(kind, kk):
            return complex(principal_value(kind, pt.xi, kk))
    elif regime == "glancing":
        evaluate = glancing_fock_value if form == "F" else glancing_airy_value

        def sym(kind, kk):
            return complex(evaluate(kind, pt.xi, kk, pt.kappa))
    else:
        raise ValueError("regime must be 'principal' or 'glancing'")
    if polarization == "TM":
        val = (k / kt) * sym("N", kt) * sym("S", k) + (0.5 - sym("Dstar", kt)) * (0.5 + sym("Dstar", k))
    else:
        val = (kt / k) * sym("S", kt) * sym("N", k) + (0.5 + sym("D", kt)) * (0.5 - sym("D", k))
    return SymbolValue(complex(val), regime)


# -- windowed (short-time Fourier) symbol ---------------------------------------


def _smooth_step(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def gate(t):
    """Even C-infinity gate: 1 for |t| <= 1/2, 0 for |t| >= 1."""
    return 1.0 - _smooth_step(2.0 * np.abs(np.asarray(t, dtype=float)) - 1.0)


def window_width(k, kappa, c=DEFAULT_EPS_C):
    return c * k ** (-1.0 / 3.0) * kappa ** (-2.0 / 3.0)


_GL16 = np.polynomial.legendre.leggauss(16)


def _half_line_rule(eps, wavelength, graded):
    edges = [0.0]
    if graded:
        h0 = min(eps, wavelength / 8.0)
        # geometric grading towards the log singularity, stopping well above
        # the resolution of the position differences
        edges = list(h0 * 2.0 ** -np.arange(28, 0, -1)) + [h0]
        edges = [0.0] + edges
    start = edges[-1]
    n_uniform = max(1, int(np.ceil((eps - start) / (wavelength / 4.0))))
    edges = np.concatenate([edges, np.linspace(start, eps, n_uniform + 1)[1:]])
    a, b = edges[:-1], edges[1:]
    x, w = _GL16
    nodes = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * x
    weights = (0.5 * (b - a))[:, None] * w
    return nodes.ravel(), weights.ravel()


def windowed_symbol(curve, kind, pt: SpectralPoint, epsilon):
    """Windowed Fourier transform of the kernel around s = pt.s.

    sigma(xi, s) ~ int ker(R(s, s')) e^{i xi (s' - s)} chi((s' - s)/eps) ds'
    for kinds S, D, Dstar (the hypersingular kernel is not integrable).
    """
    from scipy import special

    if kind not in ("S", "D", "Dstar"):
        raise ValueError("windowed symbol is available for S, D and Dstar")
    if not 0 < epsilon <= curve.length / 2:
        raise ValueError("epsilon must lie in (0, L/2]")
    k = pt.k
    wavelength = 2.0 * np.pi / (abs(k) + abs(pt.xi) + 1.0)
    u, w = _half_line_rule(epsilon, wavelength, graded=(kind == "S"))
    u = np.concatenate([-u[::-1], u])
    w = np.concatenate([w[::-1], w])
    here = curve.at_arclength(pt.s)
    there = curve.at_arclength(pt.s + u)
    diff = here.position[None, :] - there.position
    r = np.hypot(diff[:, 0], diff[:, 1])
    if kind == "S":
        ker = 0.25j * special.hankel1(0, k * r)
    elif kind == "D":
        ker = 0.25j * k * special.hankel1(1, k * r) * np.einsum("ij,ij->i", diff, there.normal) / r
    else:
        ker = 0.25j * k * special.hankel1(1, k * r) * (-(diff @ here.normal)) / r
    integrand = ker * np.exp(1j * pt.xi * u) * gate(u / epsilon)
    return SymbolValue(complex(np.sum(w * integrand)), "windowed_numeric")


# -- export ---------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolRow:
    q: int
    xi: float
    regime: str
    kind: str
    value: complex
    provenance: str


def symbol_sweep(kind, k, kappa, length, q_values, regimes=("principal", "glancing")):
    """Rows of symbol values over integer indices for CSV export.

    Glancing values use the Airy form where |x| <= 40; outside that range (or
    at a principal branch point) the row is skipped.
    """
    rows = []
    for q in q_values:
        xi = 2.0 * np.pi * q / length
        for regime in regimes:
            with np.errstate(divide="ignore", invalid="ignore"):
                if regime == "principal":
                    val, prov = complex(principal_value(kind, xi, k)), "principal"
                elif regime == "glancing":
                    x = -float(fock_variable(xi, k, kappa)) / C12
                    if abs(x) > 40.0:
                        continue
                    val, prov = complex(glancing_airy_value(kind, xi, k, kappa)), "glancing_Airy"
                elif regime == "asymptotic":
                    val = complex(glancing_asymptotic_value(kind, xi, k, kappa))
                    prov = "glancing_asymptotic"
                else:
                    raise ValueError(f"unknown regime {regime!r}")
            if np.isfinite(val):
                rows.append(SymbolRow(int(q), float(xi), regime, kind, val, prov))
    return rows


def write_symbol_csv(path, rows):
    import csv

    with open(path, "w", newline="") as fh:
        fh.write("# schema=v1 operator symbols\n")
        w = csv.writer(fh)
        w.writerow(["q", "xi", "regime", "kind", "re", "im", "provenance"])
        for r in rows:
            w.writerow([r.q, repr(r.xi), r.regime, r.kind, repr(float(r.value.real)),
                        repr(float(r.value.imag)), r.provenance])
