"""Smooth closed convex contours parametrised by arc length.

Every curve is defined through an angle-like parameter t in [0, 2*pi)
traversed counter-clockwise.  The arc-length map s(t) is represented by the
integrated Fourier series of the speed |gamma'(t)|, which is spectrally
accurate for the smooth curves handled here, and inverted by Newton's method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SurfacePoint:
    s: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray


@dataclass(frozen=True)
class ParamSample:
    """Curve data at internal-parameter values (used by the Nystrom code)."""

    t: np.ndarray
    position: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    speed: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray


class Curve:
    """Closed convex C-infinity curve.

    Use the :meth:`circle`, :meth:`ellipse` or :meth:`generic` constructors.
    ``generic`` takes polar Fourier coefficients
    ``[c0, a1, b1, a2, b2, ...]`` describing
    r(t) = c0 + sum_m (a_m cos mt + b_m sin mt).
    """

    def __init__(self, kind, params, n_fourier=1024):
        if kind not in ("circle", "ellipse", "generic"):
            raise ValueError(f"unknown curve kind {kind!r}")
        self.kind = kind
        self.params = tuple(float(p) for p in params)
        self._check_params()
        self._build_arclength(n_fourier)
        self._check_convex()

    @classmethod
    def circle(cls, radius):
        return cls("circle", (radius,))

    @classmethod
    def ellipse(cls, a, b):
        return cls("ellipse", (a, b))

    @classmethod
    def generic(cls, coefficients):
        return cls("generic", coefficients)

    @classmethod
    def from_dict(cls, spec):
        kind = spec["kind"]
        if kind == "circle":
            return cls.circle(spec["radius"])
        if kind == "ellipse":
            return cls.ellipse(spec["a"], spec["b"])
        if kind == "generic":
            return cls.generic(spec["coefficients"])
        raise ValueError(f"unknown curve kind {kind!r}")

    def to_dict(self):
        if self.kind == "circle":
            return {"kind": "circle", "radius": self.params[0]}
        if self.kind == "ellipse":
            return {"kind": "ellipse", "a": self.params[0], "b": self.params[1]}
        return {"kind": "generic", "coefficients": list(self.params)}

    def __repr__(self):
        return f"Curve({self.kind!r}, {self.params})"

    def _check_params(self):
        p = self.params
        if self.kind == "circle" and (len(p) != 1 or p[0] <= 0):
            raise ValueError("circle needs one positive radius")
        if self.kind == "ellipse" and (len(p) != 2 or min(p) <= 0):
            raise ValueError("ellipse needs two positive semi-axes")
        if self.kind == "generic" and (len(p) < 1 or len(p) % 2 == 0 or p[0] <= 0):
            raise ValueError("generic needs [c0, a1, b1, ...] with c0 > 0")

    # -- parametrisation ------------------------------------------------------

    def _derivatives(self, t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        if self.kind in ("circle", "ellipse"):
            a = self.params[0]
            b = self.params[-1]
            pos = np.stack([a * c, b * s], axis=-1)
            d1 = np.stack([-a * s, b * c], axis=-1)
            d2 = np.stack([-a * c, -b * s], axis=-1)
            return pos, d1, d2
        coef = np.asarray(self.params)
        r, r1, r2 = np.full_like(t, coef[0]), np.zeros_like(t), np.zeros_like(t)
        for m in range(1, (len(coef) - 1) // 2 + 1):
            am, bm = coef[2 * m - 1], coef[2 * m]
            cm, sm = np.cos(m * t), np.sin(m * t)
            r = r + am * cm + bm * sm
            r1 = r1 + m * (-am * sm + bm * cm)
            r2 = r2 - m * m * (am * cm + bm * sm)
        pos = np.stack([r * c, r * s], axis=-1)
        d1 = np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)
        d2 = np.stack([r2 * c - 2 * r1 * s - r * c, r2 * s + 2 * r1 * c - r * s], axis=-1)
        return pos, d1, d2

    def eval_param(self, t):
        t = np.asarray(t, dtype=float)
        pos, d1, d2 = self._derivatives(t)
        speed = np.hypot(d1[..., 0], d1[..., 1])
        tangent = d1 / speed[..., None]
        normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
        curvature = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed ** 3
        return ParamSample(t, pos, d1, d2, speed, tangent, normal, curvature)

    # -- arc length -----------------------------------------------------------

    def _build_arclength(self, m):
        while True:
            t = TWO_PI * np.arange(m) / m
            _, d1, _ = self._derivatives(t)
            speed = np.hypot(d1[:, 0], d1[:, 1])
            coef = np.fft.rfft(speed) / m
            if np.max(np.abs(coef[-m // 8:])) < 1e-15 * abs(coef[0]) or m >= 1 << 16:
                break
            m *= 2
        keep = np.nonzero(np.abs(coef) > 1e-17 * abs(coef[0]))[0]
        n_keep = int(keep.max()) + 1 if keep.size else 1
        self._a0 = coef[0].real
        self._cos_coef = 2.0 * coef[1:n_keep].real
        self._sin_coef = -2.0 * coef[1:n_keep].imag
        self._modes = np.arange(1, n_keep)
        self.length = TWO_PI * self._a0

    def arclength(self, t):
        """s(t), measured from t = 0, for t in [0, 2*pi]."""
        t = np.asarray(t, dtype=float)
        mt = np.multiply.outer(t, self._modes)
        s = self._a0 * t
        s = s + (np.sin(mt) / self._modes) @ self._cos_coef
        s = s - ((np.cos(mt) - 1.0) / self._modes) @ self._sin_coef
        return s

    def param_of_arclength(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.length)
        t = TWO_PI * s / self.length
        for _ in range(50):
            f = self.arclength(t) - s
            speed = self.eval_param(t).speed
            step = f / speed
            t = np.clip(t - step, 0.0, TWO_PI)
            if np.max(np.abs(f)) < 1e-13 * self.length:
                break
        return t

    def at_arclength(self, s):
        """Position, unit normal/tangent and curvature at arc length(s) ``s``."""
        s_arr = np.asarray(s, dtype=float)
        t = self.param_of_arclength(s_arr)
        ps = self.eval_param(t)
        return SurfacePoint(np.mod(s_arr, self.length), ps.position, ps.normal,
                            ps.tangent, ps.curvature)

    # -- checks ---------------------------------------------------------------

    def centroid(self):
        t = TWO_PI * np.arange(2048) / 2048
        pos, d1, _ = self._derivatives(t)
        x, y = pos[:, 0], pos[:, 1]
        cross = x * d1[:, 1] - y * d1[:, 0]
        area = 0.5 * np.mean(cross) * TWO_PI
        cx = np.mean(x * cross) * TWO_PI / (3 * area)
        cy = np.mean(y * cross) * TWO_PI / (3 * area)
        return np.array([cx, cy])

    def _check_convex(self):
        t = TWO_PI * np.arange(4096) / 4096
        ps = self.eval_param(t)
        if np.any(ps.curvature <= 0):
            raise ValueError(f"{self!r} is not strictly convex")
        rel = ps.position - self.centroid()
        if np.any(np.einsum("ij,ij->i", rel, ps.normal) <= 0):
            raise ValueError(f"{self!r}: normal is not outward")


def at_arclength(curve, s):
    return curve.at_arclength(s)


def glancing_points(curve, direction):
    """Roots s0 of p.n(s) = 0 with branch label sign(p.tau(s0)).

    Returns a list of ``(s0, branch)`` sorted by branch, +1 first.
    """
    p = np.asarray(direction, dtype=float)
    if abs(np.hypot(*p) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")

    def pn(t):
        return float(curve.eval_param(t).normal @ p)

    def root_in(a, b):
        fa, fb = pn(a), pn(b)
        if fa * fb < 0:
            return brentq(pn, a, b, xtol=1e-15)
        # sign change seen on the grid but lost to rounding: take the smaller end
        return a if abs(fa) <= abs(fb) else b

    # periodic scan: the closing value is the first one, so sign changes pair up
    grid = TWO_PI * np.arange(2049) / 2048
    vals = curve.eval_param(grid[:-1]).normal @ p
    vals = np.append(vals, vals[0])
    roots = []
    for i in range(2048):
        if vals[i] == 0.0:
            r = grid[i]
        elif vals[i] * vals[i + 1] < 0:
            r = root_in(grid[i], grid[i + 1])
        else:
            continue
        r %= TWO_PI
        if all(abs((r - q + np.pi) % TWO_PI - np.pi) > 1e-9 for q in roots):
            roots.append(r)
    if len(roots) != 2:
        raise RuntimeError(f"expected 2 glancing points on a convex curve, found {len(roots)}")
    out = []
    for t0 in roots:
        ps = curve.eval_param(t0)
        branch = 1 if float(ps.tangent @ p) > 0 else -1
        out.append((float(curve.arclength(t0)) % curve.length, branch))
    return sorted(out, key=lambda r: -r[1])


def fock_halfwidth(curve, s0, k):
    """Width k^(-1/3) kappa(s0)^(-2/3) of the Fock region around s0."""
    if k <= 0:
        raise ValueError("k must be positive")
    kappa = float(curve.at_arclength(s0).curvature)
    return k ** (-1.0 / 3.0) * kappa ** (-2.0 / 3.0)
