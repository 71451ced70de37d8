"""Integral counts, the lambda metric, scaling fits and LCU cost comparators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .blockham import BlockTwoBody, SparseTensor4

NNZ_CUTOFF = 1e-6

PRIMITIVE = "primitive"
ACTIVE = "active"


def dg_tag(tau: float) -> str:
    return f"dg({tau:g})"


@dataclass
class CostReport:
    representation: str
    n_functions: int
    nnz_two_body: int
    lam: float
    n_kappa: list = field(default_factory=list)
    n_terms: int = 0  # L for the LCU comparator

    @property
    def mean_n_kappa(self) -> float:
        return float(np.mean(self.n_kappa)) if self.n_kappa else float("nan")


@dataclass
class ScalingFit:
    alpha: float
    c: float
    a: float
    residual: float
    fit_range: str


@dataclass
class LcuEstimate:
    L: int
    g: int
    lam: float
    t: float
    epsilon: float
    prepare_cost: float
    select_cost: float
    total_cost: float
    measurement_count: float


def _number_term_mask(shape) -> np.ndarray:
    n = shape[0]
    p = np.arange(n)[:, None, None, None]
    q = np.arange(n)[None, :, None, None]
    r = np.arange(n)[None, None, :, None]
    s = np.arange(n)[None, None, None, :]
    return (p == r) & (q == s)


def count_nonzero(two_body, cutoff: float = NNZ_CUTOFF) -> int:
    """Entries with |v| > cutoff over the full expanded index range.

    Accepts a dense 4-index array, a BlockTwoBody (structural zeros count as
    zeros) or a SparseTensor4. A 2-index array is read as the primitive
    kernel of n_mu n_nu terms.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    if isinstance(two_body, BlockTwoBody):
        # the k > k' pairs hold the same values as their mirrors
        total = 0
        for (k, kp), t in two_body.pairs.items():
            n = int(np.count_nonzero(np.abs(t) > cutoff))
            total += n if k == kp else 2 * n
        return total
    if isinstance(two_body, SparseTensor4):
        return int(np.count_nonzero(np.abs(two_body.values) > cutoff))
    return int(np.count_nonzero(np.abs(np.asarray(two_body)) > cutoff))


def lambda_metric(two_body, exclude_number_terms: bool = True) -> float:
    """Sum of |v_pqrs|, skipping p = r and q = s terms when requested.

    A 2-index primitive kernel holds only number-operator products, so its
    lambda is zero with the exclusion on.
    """
    if isinstance(two_body, BlockTwoBody):
        total = 0.0
        for (k, kp), t in two_body.pairs.items():
            a = np.abs(t)
            # (i, i', j', j) with p=(k,i), q=(k',i'), r=(k',j'), s=(k,j);
            # p = r is impossible across distinct blocks
            if exclude_number_terms and k == kp:
                a = np.where(_number_term_mask(t.shape), 0.0, a)
            w = 1.0 if k == kp else 2.0
            total += w * float(a.sum())
        return total
    if isinstance(two_body, SparseTensor4):
        vals = np.abs(two_body.values)
        if exclude_number_terms:
            c = two_body.coords
            vals = np.where((c[:, 0] == c[:, 2]) & (c[:, 1] == c[:, 3]), 0.0, vals)
        return float(vals.sum())
    v = np.asarray(two_body, dtype=float)
    if v.ndim == 2:
        if exclude_number_terms:
            return 0.0
        return float(0.5 * np.abs(v).sum())
    a = np.abs(v)
    if exclude_number_terms:
        a = np.where(_number_term_mask(v.shape), 0.0, a)
    return float(a.sum())


def cost_report(representation: str, two_body, n_functions: int, n_kappa=(),
                cutoff: float = NNZ_CUTOFF) -> CostReport:
    nnz = count_nonzero(two_body, cutoff)
    lam = lambda_metric(two_body)
    return CostReport(representation, int(n_functions), nnz, lam, list(n_kappa), nnz)


def primitive_report(v_p: np.ndarray, cutoff: float = NNZ_CUTOFF) -> CostReport:
    """nnz counted in the n_mu n_nu form: off-diagonal kernel entries plus any
    self term."""
    return cost_report(PRIMITIVE, v_p, v_p.shape[0], cutoff=cutoff)


def fit_scaling(points, fit_range: str = "second point onward") -> ScalingFit:
    """Fit value = c + a N^alpha, dropping the first point.

    Initial guess: alpha from the endpoint log-slope, c from the first
    retained point's scale. Least squares are done on log(value).
    """
    pts = sorted((float(n), float(y)) for n, y in points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    ns = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(np.diff(ns) <= 0):
        raise ValueError("system sizes must be increasing")
    n_fit, y_fit = ns[1:], ys[1:]
    if np.allclose(y_fit, y_fit[0]):
        return ScalingFit(0.0, float(np.mean(y_fit)), 0.0, 0.0, fit_range)
    if np.any(y_fit <= 0):
        raise ValueError("values must be positive for a log-log fit")
    alpha0 = math.log(y_fit[-1] / y_fit[0]) / math.log(n_fit[-1] / n_fit[0])
    c0 = 0.0
    a0 = y_fit[-1] / n_fit[-1] ** alpha0
    scale = float(np.max(y_fit))

    def resid(x):
        alpha, c, loga = x
        model = c * scale + np.exp(loga) * n_fit**alpha
        return np.log(np.maximum(model, 1e-300)) - np.log(y_fit)

    lo_c = -0.99 * float(np.min(y_fit)) / scale
    sol = least_squares(resid, x0=[alpha0, c0, math.log(a0)],
                        bounds=([-20.0, lo_c, -700.0], [20.0, np.inf, 700.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    alpha, c, loga = sol.x
    return ScalingFit(float(alpha), float(c * scale), float(math.exp(loga)),
                      float(np.sqrt(np.mean(sol.fun**2))), fit_range)


def detect_crossover(series_a, series_b):
    """Smallest N from which b < a holds for every larger sampled N.

    Series are sequences of (N, value) on a common N grid, or dicts N -> value.
    """
    a = dict(series_a)
    b = dict(series_b)
    if sorted(a) != sorted(b):
        raise ValueError("series must share the same N grid")
    ns = sorted(a)
    result = None
    for n in reversed(ns):
        if b[n] < a[n]:
            result = n
        else:
            break
    return result


def lcu_estimate(L: int, lam: float, t: float = 1.0, g: int | None = None,
                 epsilon: float = 1e-3, select_cost: float | None = None) -> LcuEstimate:
    """Unit-constant comparator: prepare ~ L/g + g, total ~ (prepare + select)
    lambda t, measurements ~ lambda^2 / eps^2.

    The select cost defaults to the prepare cost (both are coefficient
    lookups of the same size), so at g = sqrt(L) the total reduces to the
    sqrt(L) lambda t rule of thumb up to a constant.
    """
    if L <= 0 or lam <= 0 or t <= 0 or epsilon <= 0:
        raise ValueError("all inputs must be positive")
    if g is None:
        g = max(1, int(round(math.sqrt(L))))
    if g <= 0:
        raise ValueError("g must be positive")
    prepare = L / g + g
    select = prepare if select_cost is None else float(select_cost)
    total = (prepare + select) * lam * t
    return LcuEstimate(int(L), int(g), float(lam), float(t), float(epsilon), prepare, select,
                       total, lam**2 / epsilon**2)


def evolution_cost(L: int, lam: float, t: float = 1.0) -> float:
    """Rule-of-thumb evolution cost sqrt(L) lambda t."""
    return math.sqrt(L) * lam * t
