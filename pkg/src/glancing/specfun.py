"""Special functions used across the package.

Airy functions and the order-0/1 Hankel functions are thin, domain-checked
wrappers around :mod:`scipy.special`.  Integer-order Bessel sequences are
computed here by Miller's algorithm so that the circle oracle does not share
code with the Nystrom kernels, and the Fock-type integral

.. math::
    F(K) = \\int_0^\\infty u^{-1/2} e^{i(Ku - u^3)}\\, du

is evaluated by contour deformation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

AIRY_RANGE = 40.0
FOCK_RANGE = 30.0
EULER_GAMMA = 0.57721566490153286061


class BesselOverflow(ArithmeticError):
    """Raised when Y_q(x) leaves the double range during upward recurrence.

    ``pairs`` holds every order computed before the overflow, so a caller can
    keep the valid prefix and treat higher orders by their decayed limit.
    """

    def __init__(self, order, pairs):
        super().__init__(f"Y_q overflow at order {order}")
        self.order = order
        self.pairs = pairs


class FockQuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class AiryQuad:
    ai: float
    aip: float
    bi: float
    bip: float

    @property
    def wronskian(self):
        return self.ai * self.bip - self.aip * self.bi


@dataclass(frozen=True)
class BesselPair:
    order: int
    j: float
    y: float


@dataclass(frozen=True)
class FockValue:
    k_arg: complex
    value: complex
    derivative1: complex
    derivative2: complex


def airy(x):
    """Ai, Ai', Bi, Bi' at a real point ``x`` in [-40, 40]."""
    x = float(x)
    if not -AIRY_RANGE <= x <= AIRY_RANGE:
        raise ValueError(f"airy: x={x} outside [-{AIRY_RANGE}, {AIRY_RANGE}]")
    ai, aip, bi, bip = special.airy(x)
    return AiryQuad(float(ai), float(aip), float(bi), float(bip))


def airy_array(x):
    """Vectorised Airy quadruple; accepts real or complex arrays, no range check."""
    return special.airy(np.asarray(x))


def hankel1(order, x):
    """H^(1)_order(x) for order 0 or 1 and real x > 0."""
    if order not in (0, 1):
        raise ValueError("hankel1: only orders 0 and 1 are supported")
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("hankel1: argument must be strictly positive")
    out = special.hankel1(order, x)
    return complex(out) if out.ndim == 0 else out


def _miller_start(order_max, z):
    r = abs(z)
    return int(max(order_max, math.ceil(r)) + 60 + 10 * r ** (1.0 / 3.0))


def jy_orders(order_max, z):
    """Arrays (J_q(z), Y_q(z)) for q = 0..order_max.

    J comes from downward Miller recurrence normalised by
    J_0 + 2 sum J_2m = 1; Y_0, Y_1 from the Neumann series in the computed J,
    then upward recurrence.  ``z`` may be complex (|Im z| small compared with
    Re z is the intended regime).  Orders whose Y overflowed are returned as
    inf; J there may have underflowed to zero.
    """
    order_max = int(order_max)
    if order_max < 0:
        raise ValueError("order_max must be non-negative")
    z = complex(z)
    if z == 0:
        raise ValueError("jy_orders: z must be nonzero")
    is_real = z.imag == 0.0 and z.real > 0
    dtype = float if is_real else complex
    zz = z.real if is_real else z

    m = _miller_start(max(order_max, 2), z)
    m += m % 2
    j = np.zeros(m + 2, dtype=dtype)
    j[m] = 1e-250
    big = 1e250
    for q in range(m, 0, -1):
        j[q - 1] = (2.0 * q / zz) * j[q] - j[q + 1]
        if abs(j[q - 1]) > big:
            j[q - 1:] *= 1.0 / big
    norm = j[0] + 2.0 * np.sum(j[2:m + 1:2])
    j = j / norm

    kk = np.arange(1, m // 2)
    sign = (-1.0) ** kk
    log_term = (2.0 / np.pi) * (np.log(zz / 2.0) + EULER_GAMMA)
    y0 = log_term * j[0] - (4.0 / np.pi) * np.sum(sign * j[2 * kk] / kk)
    y1 = (-(2.0 / (np.pi * zz)) * j[0] + log_term * j[1]
          + (2.0 / np.pi) * np.sum(sign * (j[2 * kk - 1] - j[2 * kk + 1]) / kk))

    y = np.empty(order_max + 1, dtype=dtype)
    y[0] = y0
    if order_max >= 1:
        y[1] = y1
    limit = 1e300
    overflowed = False
    for q in range(1, order_max):
        if overflowed:
            y[q + 1] = np.inf
            continue
        nxt = (2.0 * q / zz) * y[q] - y[q - 1]
        if not np.isfinite(nxt) or abs(nxt) > limit:
            overflowed = True
            y[q + 1] = np.inf
        else:
            y[q + 1] = nxt
    return j[:order_max + 1].copy(), y


def bessel_jy(order_max, x):
    """List of :class:`BesselPair` for integer orders 0..order_max at real x > 0.

    Raises :class:`BesselOverflow` (carrying the valid prefix) when Y_q
    exceeds the representable range.
    """
    x = float(x)
    if not x > 0:
        raise ValueError("bessel_jy: x must be positive")
    j, y = jy_orders(order_max, x)
    pairs = []
    for q in range(int(order_max) + 1):
        if not np.isfinite(y[q]):
            raise BesselOverflow(q, pairs)
        pairs.append(BesselPair(q, float(j[q]), float(y[q])))
    return pairs


# --- Fock integral -----------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = leggauss(24)


def _panel_rule(a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _fock_moments(K, panels):
    """Return the three integrals of u^p e^{i(Ku-u^3)} for p = -1/2, 1/2, 3/2."""
    powers = np.array([-0.5, 0.5, 1.5])
    growth = 0.5 * K.real - 0.5 * math.sqrt(3.0) * K.imag
    if growth <= 1.0:
        # ray u = t e^{-i pi/6}: both e^{iKu} and e^{-iu^3} are non-growing there
        d = np.exp(-1j * np.pi / 6)
        v, w = _panel_rule(0.0, 2.1, panels)
        t = v * v
        u = t * d
        phase = np.exp(1j * K * u - t ** 3)
        # u = v^2 d -> u^p du = 2 v^{2p+1} d^{p+1} dv
        out = [np.sum(w * 2.0 * v ** (2 * p + 1) * d ** (p + 1) * phase) for p in powers]
        return np.array(out)

    # saddle path: segment 0 -> u0, then a steepest-descent ray from u0
    u0 = np.sqrt(K / 3.0)
    v, w = _panel_rule(0.0, 1.0, 2 * panels)
    u = u0 * v * v
    phase = np.exp(1j * (K * u - u ** 3))
    seg = [np.sum(w * 2.0 * u0 ** (p + 1) * v ** (2 * p + 1) * phase) for p in powers]

    alpha = -0.5 * (0.5 * np.pi + np.angle(u0))
    e = np.exp(1j * alpha)
    r_max = 4.5 + 2.0 / (1.0 + abs(u0))
    r, wr = _panel_rule(0.0, r_max, panels)
    u = u0 + r * e
    phase = np.exp(1j * (K * u - u ** 3))
    ray = [np.sum(wr * e * u ** p * phase) for p in powers]
    return np.array(seg) + np.array(ray)


def fock_f(k_arg, tol=1e-10):
    """F(K), F'(K) and F''(K) by rotated-contour Gauss-Legendre quadrature.

    Real K must lie in [-30, 30]; complex K (used for the complexified
    wavenumber) is accepted when |Re K| <= 30 and Im K >= 0.  The result is
    checked against a refined rule and :class:`FockQuadratureError` raised
    if the two differ by more than ``tol``.
    """
    K = complex(k_arg)
    if abs(K.real) > FOCK_RANGE or K.imag < 0 or abs(K.imag) > FOCK_RANGE:
        raise ValueError(f"fock_f: K={k_arg} outside supported range")
    coarse = _fock_moments(K, 12)
    fine = _fock_moments(K, 18)
    if np.max(np.abs(fine - coarse)) > tol:
        raise FockQuadratureError(f"fock_f did not converge at K={k_arg}")
    m_half, p_half, p_three_half = fine
    return FockValue(K, m_half, 1j * p_half, -p_three_half)
