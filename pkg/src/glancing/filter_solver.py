"""Low-rank filtering of the combined operator and a Woodbury direct solve.

The discrete CCFIO is split as A = I/2 + C.  The filter keeps the part of C
above a relative singular-value threshold eps, C ~ U V with U = U_r diag(s_r)
and V = Vh_r, and systems A x = b are solved by the Woodbury identity

    (I/2 + U V)^(-1) = 2 I - 4 U (I_r + 2 V U)^(-1) V,

whose r x r core is factorised once and reused for every right-hand side.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator

from .operators import DiscreteOperator, assemble_ccfio

SHIFT = 0.5


class CoreSingularError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class FilteredDecomposition:
    u: np.ndarray
    v: np.ndarray
    epsilon: float
    singular_values: np.ndarray
    base: float = SHIFT

    @property
    def rank(self):
        return self.u.shape[1]

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def sigma_max(self):
        return float(self.singular_values[0]) if self.singular_values.size else 0.0

    def low_rank(self):
        return self.u @ self.v

    def reconstruct(self):
        return self.base * np.eye(self.n) + self.low_rank()


@dataclass(frozen=True)
class RankSweepRow:
    k: float
    n: int
    r_eps: int
    sigma_max: float
    wall_time: float

    def __post_init__(self):
        if self.r_eps > self.n:
            raise ValueError("r_eps cannot exceed n")


def _as_square(matrix):
    a = matrix.matrix if isinstance(matrix, DiscreteOperator) else matrix
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("operator matrix must be square")
    if not np.all(np.isfinite(a)):
        raise ValueError("operator matrix has non-finite entries")
    return a.astype(complex, copy=False)


def eps_rank(singular_values, epsilon):
    """Number of singular values strictly above epsilon * sigma_max."""
    s = np.asarray(singular_values)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > epsilon * s[0]))


def decompose(ccfio, epsilon, base=SHIFT):
    """SVD-truncated factors of C = ccfio - base * I at relative threshold epsilon."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    a = _as_square(ccfio)
    c = a - base * np.eye(a.shape[0])
    try:
        u, s, vh = linalg.svd(c, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        u, s, vh = linalg.svd(c, lapack_driver="gesvd")
    r = eps_rank(s, epsilon)
    return FilteredDecomposition(u[:, :r] * s[:r], vh[:r], float(epsilon), s, base)


def _core_factor(dec):
    core = np.eye(dec.rank) + (1.0 / dec.base) * (dec.v @ dec.u)
    if dec.rank == 0:
        return None, 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rcond = float(1.0 / abs(np.linalg.cond(core, 1)))
    if not np.isfinite(rcond) or rcond < 1e-14:
        raise CoreSingularError("Woodbury core is singular; epsilon is too aggressive")
    return linalg.lu_factor(core, check_finite=False), rcond


def _apply(dec, lu, b):
    inv_base = 1.0 / dec.base
    x = inv_base * b
    if dec.rank:
        y = linalg.lu_solve(lu, dec.v @ x, check_finite=False)
        x = x - inv_base * (dec.u @ y)
    return x


def woodbury_solve(dec: FilteredDecomposition, rhs_block):
    """Solve (base I + U V) x = b for every column of ``rhs_block``."""
    lu, _ = _core_factor(dec)
    return _apply(dec, lu, np.asarray(rhs_block, dtype=complex))


def residual_constant(ccfio, x, b, epsilon):
    """c = ||A x - b|| / (epsilon ||b||), per column."""
    a = _as_square(ccfio)
    b2 = b.reshape(b.shape[0], -1)
    x2 = x.reshape(x.shape[0], -1)
    res = np.linalg.norm(a @ x2 - b2, axis=0)
    return res / (max(epsilon, np.finfo(float).eps) * np.linalg.norm(b2, axis=0))


# -- frequency sweep -----------------------------------------------------------------


def sweep_nodes(curve, k):
    """n = ceil(8 kL / 2 pi), rounded up to an even number."""
    n = int(math.ceil(8.0 * k * curve.length / (2.0 * math.pi)))
    return n + n % 2


def fit_exponent(ks, ranks):
    """Least-squares slope of log r against log k."""
    ks = np.asarray(ks, dtype=float)
    ranks = np.asarray(ranks, dtype=float)
    if ks.size < 2 or np.any(ranks <= 0):
        return float("nan")
    return float(np.polyfit(np.log(ks), np.log(ranks), 1)[0])


def rank_sweep(curve, config_base, polarization, k_list, epsilon):
    """epsilon-rank of C at each wavenumber with n scaled proportionally to k."""
    ks = [float(k) for k in k_list]
    if len(ks) < 4:
        raise ValueError("need ≥ 4 frequencies")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k_list must be strictly ascending")
    if ks[-1] < 2 * ks[0]:
        raise ValueError("k_list must span at least one octave")
    rows = []
    for k in ks:
        t0 = time.perf_counter()
        cfg = replace(config_base, k=k)
        n = sweep_nodes(curve, k)
        opm = assemble_ccfio(curve, cfg, polarization, n)
        s = linalg.svdvals(opm.matrix - SHIFT * np.eye(n))
        rows.append(RankSweepRow(k, n, eps_rank(s, epsilon), float(s[0]),
                                 time.perf_counter() - t0))
    return rows


def write_sweep_csv(path, rows, label=""):
    """Sweep rows with the running exponent fit over the rows so far."""
    with open(path, "w", newline="") as fh:
        fh.write("# schema=v1 rank sweep (wall_time_s is non-deterministic)\n")
        if label:
            fh.write(f"# {label}\n")
        w = csv.writer(fh)
        w.writerow(["k", "n", "r_eps", "sigma_max", "fit_exponent_partial", "wall_time_s"])
        for i, row in enumerate(rows):
            part = fit_exponent([r.k for r in rows[:i + 1]], [r.r_eps for r in rows[:i + 1]])
            w.writerow([repr(row.k), row.n, row.r_eps, repr(row.sigma_max),
                        "" if math.isnan(part) else repr(part), f"{row.wall_time:.6f}"])


def glancing_band_energy(dec, ka, radius=1.0, width=6.0):
    """Fraction of Fourier energy of each retained right singular vector in
    the bands |q -+ ka| <= width 24^(-1/3) ka^(1/3) (circle, uniform nodes).

    The rows of V are conjugated right singular vectors, hence the conjugate.
    """
    n = dec.n
    q = np.fft.fftfreq(n, 1.0 / n)
    half = width * 24.0 ** (-1.0 / 3.0) * ka ** (1.0 / 3.0)
    band = (np.abs(np.abs(q) - ka) <= half)
    if dec.rank == 0:
        return np.zeros(0)
    coef = np.fft.fft(np.conj(dec.v), axis=1)
    energy = np.abs(coef) ** 2
    return energy[:, band].sum(axis=1) / energy.sum(axis=1)


# -- estimator front end -----------------------------------------------------------


class FilteredDirectSolver(BaseEstimator):
    """Direct solver for (I/2 + C) x = b with C replaced by its eps-truncation.

    Parameters
    ----------
    epsilon : float
        Relative singular-value threshold; 0 keeps every non-zero singular value.
    base : float
        Scaled-identity coefficient (1/2 for the combined operator).

    Attributes
    ----------
    decomposition_ : FilteredDecomposition
    rank_ : int
    core_rcond_ : float
        Reciprocal 1-norm condition number of the r x r Woodbury core.
    n_features_in_ : int
    """

    def __init__(self, epsilon=1e-3, base=SHIFT):
        self.epsilon = epsilon
        self.base = base

    def fit(self, operator, y=None):
        a = _as_square(operator)
        self.decomposition_ = decompose(a, self.epsilon, self.base)
        self._lu, self.core_rcond_ = _core_factor(self.decomposition_)
        self.rank_ = self.decomposition_.rank
        self.n_features_in_ = a.shape[0]
        return self

    def _check_fitted(self):
        if not hasattr(self, "decomposition_"):
            raise RuntimeError("FilteredDirectSolver is not fitted yet; call fit first")

    def solve(self, rhs_block):
        """Solutions for a vector or an n x m block of right-hand sides."""
        self._check_fitted()
        b = np.asarray(rhs_block)
        if b.shape[0] != self.n_features_in_ or b.ndim > 2:
            raise ValueError(f"right-hand side must have {self.n_features_in_} rows")
        if not np.all(np.isfinite(b)):
            raise ValueError("right-hand side has non-finite entries")
        return _apply(self.decomposition_, self._lu, b.astype(complex, copy=False))

    predict = solve
