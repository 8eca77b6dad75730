"""Nystrom discretisation of the Helmholtz boundary operators on a smooth curve.

Quadrature is Kress' logarithmic splitting on a uniform grid in the curve
parameter: every kernel (already multiplied by the speed |gamma'(tau)|) is
written as ``M1 * ln(4 sin^2((t - tau)/2)) + M2`` with smooth M1, M2, the log
part is integrated with the exact trigonometric weights and the smooth part
with the trapezoidal rule.  The hypersingular operator uses the Maue form

    N f = -d/ds S(df/ds) - k^2 S_nn f,   S_nn kernel = G n(s).n(s').

Matrices act on nodal values, so ``A @ f`` approximates the continuous
operator at the nodes.  The wavenumber may be complex, and may vary with the
target node (one value per row) for the curvature-local complexification;
in that case the wavenumber is frozen per row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import special

from .geometry import Curve

KINDS = ("S", "D", "Dstar", "N", "identity")
EULER_GAMMA = 0.57721566490153286061
MIN_NODES = 16


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, message, rcond):
        super().__init__(message)
        self.rcond = rcond


@dataclass(frozen=True)
class PlaneWave:
    direction: tuple
    amplitude: float = 1.0
    polarization: str = "TM"

    def __post_init__(self):
        p = np.asarray(self.direction, dtype=float)
        if p.shape != (2,) or abs(np.hypot(*p) - 1.0) > 1e-12:
            raise ValueError("plane-wave direction must be a unit 2-vector")
        if self.polarization not in ("TM", "TE"):
            raise ValueError("polarization must be 'TM' or 'TE'")
        object.__setattr__(self, "direction", (float(p[0]), float(p[1])))

    @classmethod
    def from_angle(cls, angle, amplitude=1.0, polarization="TM"):
        return cls((np.cos(angle), np.sin(angle)), amplitude, polarization)

    @property
    def p(self):
        return np.asarray(self.direction)


@dataclass(frozen=True)
class WaveConfig:
    """Wavenumber, impedance and the complexification rule for k~ = k + i k_i.

    ``k_i_rule`` is ``"zero"``, ``"circle"`` (constant
    24^(-1/3) k^(1/3) a^(-2/3), ``radius`` required) or ``"curvature_local"``
    (24^(-1/3) k^(1/3) kappa(s)^(2/3)).  ``k_i_scale`` multiplies the rule and
    is only meant for sensitivity studies.
    """

    k: float
    eta: float = 1.0
    k_i_rule: str = "circle"
    radius: float | None = None
    k_i_scale: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.k_i_rule not in ("zero", "circle", "curvature_local"):
            raise ValueError(f"unknown k_i rule {self.k_i_rule!r}")
        if self.k_i_rule == "circle" and not (self.radius and self.radius > 0):
            raise ValueError("circle k_i rule needs a positive radius")

    def k_i(self, curvature=None):
        """Imaginary part of k~ ; ``curvature`` is needed for the local rule."""
        c = 24.0 ** (-1.0 / 3.0) * self.k ** (1.0 / 3.0) * self.k_i_scale
        if self.k_i_rule == "zero":
            return 0.0 if curvature is None else np.zeros_like(np.asarray(curvature, float))
        if self.k_i_rule == "circle":
            val = c * self.radius ** (-2.0 / 3.0)
            return val if curvature is None else np.full_like(np.asarray(curvature, float), val)
        if curvature is None:
            raise ValueError("curvature_local rule needs the curvature")
        return c * np.asarray(curvature, float) ** (2.0 / 3.0)

    def k_tilde(self, curvature=None):
        return self.k + 1j * self.k_i(curvature)


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: np.ndarray
    t: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    operator_kind: str
    wavenumber: complex | np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.matrix.shape[0]


class Discretization:
    """Nodes, geometry and distance/log-weight tables for one (curve, n)."""

    def __init__(self, curve: Curve, n: int, offset: float = 0.0):
        n = int(n)
        if n < MIN_NODES or n % 2:
            raise ValueError(f"n must be even and >= {MIN_NODES}, got {n}")
        self.curve = curve
        self.n = n
        self.m = n // 2
        self.t = 2.0 * np.pi * np.arange(n) / n + offset
        self.geo = curve.eval_param(self.t)
        if not np.all(np.isfinite(self.geo.curvature)):
            raise ValueError("curvature evaluation failed")
        self.s = curve.arclength(np.mod(self.t, 2.0 * np.pi))
        self.weights = (np.pi / self.m) * self.geo.speed

        idx = np.arange(n)
        lag = np.subtract.outer(idx, idx) % n
        self._lag = lag
        self.diff = self.geo.position[:, None, :] - self.geo.position[None, :, :]
        self.dist = np.hypot(self.diff[..., 0], self.diff[..., 1])
        np.fill_diagonal(self.dist, 1.0)
        dt = 2.0 * np.pi * lag / n
        with np.errstate(divide="ignore"):
            self.logsin = np.log(4.0 * np.sin(dt / 2.0) ** 2)
        np.fill_diagonal(self.logsin, 0.0)
        m = self.m
        l = np.arange(1, m)
        d = np.arange(n)
        r = -(2.0 * np.pi / m) * (np.cos(np.outer(d, l) * np.pi / m) / l).sum(axis=1)
        r -= (np.pi / m ** 2) * np.cos(np.pi * d)
        self.rlog = r[lag]

    # -- derivative along the curve -------------------------------------------

    def _dt_symbol(self):
        freq = np.fft.fftfreq(self.n, d=1.0 / self.n)
        freq[self.m] = 0.0
        return 1j * freq

    def dt_rows(self, a):
        """d/dt applied to every column (acts from the left)."""
        return np.fft.ifft(self._dt_symbol()[:, None] * np.fft.fft(a, axis=0), axis=0)

    def dt_cols(self, a):
        """a @ Dt, with Dt the spectral derivative matrix."""
        # (A Dt)^T = Dt^T A^T = -Dt A^T (Dt is antisymmetric)
        return -self.dt_rows(a.T).T


def _kernel_values(disc, k):
    """H0, H1, J0, J1 of k*R on the full grid (diagonal entries are junk)."""
    k_arr = np.asarray(k)
    n = disc.n
    if k_arr.ndim == 0:
        iu = np.triu_indices(n, 1)
        z = complex(k) * disc.dist[iu]
        real_k = complex(k).imag == 0.0
        if real_k:
            z = z.real
        h0 = special.hankel1(0, z)
        h1 = special.hankel1(1, z)
        if real_k:
            j0, j1 = h0.real, h1.real
        else:
            j0, j1 = special.jv(0, z), special.jv(1, z)
        out = []
        for v in (h0, h1, j0, j1):
            full = np.zeros((n, n), dtype=v.dtype)
            full[iu] = v
            full = full + full.T
            out.append(full)
        return out
    z = k_arr.reshape(-1, 1) * disc.dist
    return [special.hankel1(0, z), special.hankel1(1, z), special.jv(0, z), special.jv(1, z)]


def _row_k(disc, k):
    k_arr = np.asarray(k, dtype=complex)
    return k_arr if k_arr.ndim == 0 else k_arr.reshape(-1, 1)


def _combine(disc, m1, m2_full, m2_diag):
    """Kress quadrature: R_j * M1 + (pi/m) * (M - M1 * log-term)."""
    m2 = m2_full - m1 * disc.logsin
    np.fill_diagonal(m2, m2_diag)
    return disc.rlog * m1 + (np.pi / disc.m) * m2


def _single_layer(disc, k, vals, weight=None):
    h0, _, j0, _ = vals
    sp = disc.geo.speed[None, :]
    m1 = -(1.0 / (4.0 * np.pi)) * j0 * sp
    m_full = 0.25j * h0 * sp
    np.fill_diagonal(m1, -(1.0 / (4.0 * np.pi)) * disc.geo.speed)
    kd = np.broadcast_to(np.asarray(k, dtype=complex), (disc.n,))
    diag = (0.25j - EULER_GAMMA / (2.0 * np.pi)
            - np.log(kd * disc.geo.speed / 2.0) / (2.0 * np.pi)) * disc.geo.speed
    if weight is not None:
        m1 = m1 * weight
        m_full = m_full * weight
        diag = diag * np.diag(weight)
    return _combine(disc, m1, m_full, diag)


def _double_layer(disc, k, vals, adjoint):
    _, h1, _, j1 = vals
    kk = _row_k(disc, k)
    geo = disc.geo
    if adjoint:
        # (gamma(tau) - gamma(t)) . n(t) * |gamma'(tau)|
        g = -np.einsum("ijk,ik->ij", disc.diff, geo.normal) * geo.speed[None, :]
    else:
        # (gamma(t) - gamma(tau)) . n(tau) |gamma'(tau)|
        nu = geo.normal * geo.speed[:, None]
        g = np.einsum("ijk,jk->ij", disc.diff, nu)
    g = g / disc.dist
    m1 = -(kk / (4.0 * np.pi)) * j1 * g
    np.fill_diagonal(m1, 0.0)
    m_full = 0.25j * kk * h1 * g
    diag = -geo.curvature * geo.speed / (4.0 * np.pi)
    return _combine(disc, m1, m_full, diag)


def _hypersingular(disc, k, vals):
    geo = disc.geo
    s_mat = _single_layer(disc, k, vals)
    nn = geo.normal @ geo.normal.T
    s_nn = _single_layer(disc, k, vals, weight=nn)
    inv_speed = 1.0 / geo.speed
    # -Ds S Ds with Ds = diag(1/|gamma'|) Dt
    inner = disc.dt_cols(s_mat * inv_speed[None, :])
    tang = inv_speed[:, None] * disc.dt_rows(inner)
    k2 = np.asarray(k, dtype=complex) ** 2
    k2 = k2 if k2.ndim == 0 else k2.reshape(-1, 1)
    return -tang - k2 * s_nn


def _check_k(k):
    k_arr = np.asarray(k, dtype=complex)
    if np.any(k_arr.imag < 0) or np.any(k_arr.real <= 0):
        raise ValueError("wavenumber must have Re k > 0 and Im k >= 0")
    return complex(k_arr) if k_arr.ndim == 0 else k_arr


def _matrix(disc, kind, k, vals=None):
    if kind == "identity":
        return np.eye(disc.n, dtype=complex)
    if vals is None:
        vals = _kernel_values(disc, k)
    if kind == "S":
        return _single_layer(disc, k, vals)
    if kind == "D":
        return _double_layer(disc, k, vals, adjoint=False)
    if kind == "Dstar":
        return _double_layer(disc, k, vals, adjoint=True)
    if kind == "N":
        return _hypersingular(disc, k, vals)
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")


def _wrap(disc, matrix, kind, k, **meta):
    return DiscreteOperator(matrix, disc.t, disc.s, disc.weights, kind, k, meta)


def assemble(curve, kind, k, n, offset=0.0, disc=None):
    """Nystrom matrix of S, D, Dstar, N or the identity on ``n`` nodes.

    ``k`` may be complex (Im k >= 0) or an array of per-node wavenumbers.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")
    k = _check_k(k)
    disc = disc or Discretization(curve, n, offset)
    return _wrap(disc, _matrix(disc, kind, k), kind, k)


def _k_tilde_nodes(config, disc):
    if config.k_i_rule == "curvature_local":
        return config.k_tilde(disc.geo.curvature)
    return complex(config.k_tilde())


def assemble_ccfio(curve, config: WaveConfig, polarization, n, offset=0.0, disc=None):
    """Calderon combined field operator for TM or TE polarisation.

    TM: (k/k~) N^{k~} S^k + (I/2 - D*^{k~})(I/2 + D*^k)
    TE: (k~/k) S^{k~} N^k + (I/2 + D^{k~})(I/2 - D^k)
    """
    if polarization not in ("TM", "TE"):
        raise ValueError("polarization must be 'TM' or 'TE'")
    disc = disc or Discretization(curve, n, offset)
    k = config.k
    kt = _k_tilde_nodes(config, disc)
    kt_rows = kt if np.ndim(kt) == 0 else kt.reshape(-1, 1)
    half = 0.5 * np.eye(disc.n)
    vals_k = _kernel_values(disc, k)
    vals_t = vals_k if np.all(np.asarray(kt) == k) else _kernel_values(disc, kt)
    if polarization == "TM":
        s_k = _single_layer(disc, k, vals_k)
        d_k = _double_layer(disc, k, vals_k, adjoint=True)
        del vals_k
        n_t = _hypersingular(disc, kt, vals_t)
        d_t = _double_layer(disc, kt, vals_t, adjoint=True)
        del vals_t
        mat = ((k / kt_rows) * n_t) @ s_k
        del n_t, s_k
        mat += (half - d_t) @ (half + d_k)
    else:
        n_k = _hypersingular(disc, k, vals_k)
        d_k = _double_layer(disc, k, vals_k, adjoint=False)
        del vals_k
        s_t = _single_layer(disc, kt, vals_t)
        d_t = _double_layer(disc, kt, vals_t, adjoint=False)
        del vals_t
        mat = ((kt_rows / k) * s_t) @ n_k
        del s_t, n_k
        mat += (half + d_t) @ (half - d_k)
    return _wrap(disc, mat, f"CCFIO_{polarization}", kt, polarization=polarization,
                 real_k=k, k_i_rule=config.k_i_rule)


def incident_fields(disc, wave: PlaneWave, config: WaveConfig):
    """Incident (E_z, H_t) for TM or (E_t, H_z) for TE at the nodes."""
    p = wave.p
    k, eta, e0 = config.k, config.eta, wave.amplitude
    phase = np.exp(1j * k * (disc.geo.position @ p))
    pn = disc.geo.normal @ p
    if wave.polarization == "TM":
        return e0 * phase, -(e0 / eta) * phase * pn
    return 1j * e0 * phase * pn, 1j * (e0 / eta) * phase


def rhs(curve, wave: PlaneWave, config: WaveConfig, n, offset=0.0, disc=None):
    """Preconditioned right-hand side of the TM or TE CCFIE at the nodes.

    TM: -(N^{k~}/k~) E_z/(i eta) + (I/2 - D*^{k~}) H_t
    TE:  k~ S^{k~} E_t/(i eta)   - (I/2 + D^{k~}) H_z
    """
    disc = disc or Discretization(curve, n, offset)
    kt = _k_tilde_nodes(config, disc)
    kt_vec = np.broadcast_to(np.asarray(kt, dtype=complex), (disc.n,))
    vals = _kernel_values(disc, kt)
    e_field, h_field = incident_fields(disc, wave, config)
    eta = config.eta
    if wave.polarization == "TM":
        n_t = _hypersingular(disc, kt, vals)
        d_t = _double_layer(disc, kt, vals, adjoint=True)
        return -(n_t @ (e_field / (1j * eta))) / kt_vec + 0.5 * h_field - d_t @ h_field
    s_t = _single_layer(disc, kt, vals)
    d_t = _double_layer(disc, kt, vals, adjoint=False)
    return kt_vec * (s_t @ (e_field / (1j * eta))) - 0.5 * h_field - d_t @ h_field


def solve_dense(opm, b, check=True):
    """Direct LU solve of ``opm x = b`` (``opm`` a DiscreteOperator or array).

    Raises :class:`SingularSystemError` when the reciprocal condition
    estimate collapses; returns ``(x, info)`` with the estimate and residual.
    """
    a = opm.matrix if isinstance(opm, DiscreteOperator) else np.asarray(opm)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("system matrix must be square")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("system has non-finite entries")
    lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    anorm = np.linalg.norm(a, 1)
    gecon = scipy.linalg.lapack.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond < np.finfo(float).eps:
        raise SingularSystemError(f"matrix is numerically singular (rcond={rcond:.2e})", rcond)
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    resid = np.linalg.norm(a @ x - b) / (np.linalg.norm(a, 2 if a.shape[0] <= 512 else "fro")
                                         * max(np.linalg.norm(x), 1e-300))
    if check and resid > 1e-10:
        raise np.linalg.LinAlgError(f"dense solve residual {resid:.2e} too large")
    return x, {"rcond": float(rcond), "relative_residual": float(resid)}


# -- binary dump ----------------------------------------------------------------

MAGIC = b"BIEM"


def export_matrix(path, matrix):
    """Write magic 'BIEM', little-endian uint64 n, then row-major (re, im) float64."""
    a = np.ascontiguousarray(np.asarray(matrix, dtype="<c16"))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("only square matrices can be exported")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", a.shape[0]))
        fh.write(a.tobytes(order="C"))


def load_matrix(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a BIEM dump")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != n * n:
        raise ValueError(f"{path}: truncated dump")
    return data.reshape(n, n).astype(complex)
