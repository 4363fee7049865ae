"""Closed-form and integral expressions for class-separability bounds.

The model: for a classifier trained with cross-entropy to loss value L, the
transformed score (-log yhat_true)^(1/beta) is treated as Exp(mu) with
mu = (L / Gamma(beta+1))^(1/beta).  From that single assumption the module
computes

* the ccdf of the projected squared intra-class distance (``intra_ccdf``),
* a lower bound for the projected squared inter-class distance ccdf
  (``inter_ccdf_lower``), parameterized by a confusion constant kappa,
* ``b_A``: a lower bound on P(inter^2 > gamma * intra^2) after projection,
* ``b`` / ``b_c``: the same event for raw feature distances, obtained by a
  grid search over a chi-squared concentration envelope,
* ``expected_accuracy``: expected per-class accuracy as a function of
  (L, beta, kappa*).

All functions are pure; sweeps may fan out over a thread pool and always
return rows in grid order.
"""

from __future__ import annotations

import bisect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .numerics import (
    DEFAULT_QUAD_1D,
    DEFAULT_QUAD_2D,
    QuadratureConfig,
    _log1p_exp_array,
    _log_expm1_array,
    chi2_cdf_scaled,
    integrate_expweighted,
    integrate_expweighted_2d,
    log_gamma,
)

__all__ = [
    "LossModel",
    "ClassConfig",
    "BoundResult",
    "CcdfCurve",
    "mu_from_loss",
    "default_kappa",
    "h1",
    "h2",
    "h3",
    "intra_ccdf",
    "inter_ccdf_lower",
    "b_A",
    "b",
    "b_c",
    "expected_accuracy",
    "ccdf_sweep",
    "ba_sweep",
    "bc_sweep",
]

logger = logging.getLogger(__name__)

BoundMethod = Literal["chi2_cdf", "concentration"]
CcdfKind = Literal["intra", "inter_lower"]


def mu_from_loss(loss: float, beta: float) -> float:
    """Exponential mean mu = (L / Gamma(beta+1))^(1/beta) of the score model."""
    if not loss > 0.0:
        raise ValueError(f"loss must be positive, got {loss}")
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    return (loss / math.exp(log_gamma(beta + 1.0))) ** (1.0 / beta)


def default_kappa(num_classes: int) -> float:
    """Confusion constant C-1 for classes that are all equally dissimilar."""
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    return float(num_classes - 1)


@dataclass(frozen=True)
class LossModel:
    """The (L, beta, mu) triple of the exponential tail model; mu is derived."""

    loss: float
    beta: float
    mu: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", mu_from_loss(self.loss, self.beta))


@dataclass(frozen=True)
class ClassConfig:
    """Class count and the confusion constant kappa (defaults to C-1)."""

    num_classes: int
    kappa: float | None = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.kappa is None:
            object.__setattr__(self, "kappa", default_kappa(self.num_classes))
        if self.kappa < 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")


@dataclass(frozen=True)
class BoundResult:
    """A maximized bound value with its epsilon argmax and the method used."""

    value: float
    eps1: float
    eps2: float
    method: BoundMethod
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"value must lie in [0, 1], got {self.value}")
        if not (0.0 < self.eps1 < 1.0 and 0.0 < self.eps2 < 1.0):
            raise ValueError(f"eps1/eps2 must lie in (0, 1), got {self.eps1}, {self.eps2}")
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class CcdfCurve:
    """A ccdf evaluated on an ordered nu grid (squared distance / (C-1))."""

    nu_values: tuple
    probabilities: tuple
    kind: CcdfKind


# ---------------------------------------------------------------------------
# The h transforms (log-domain throughout)
# ---------------------------------------------------------------------------
#
# Writing le(w) = ln(e^{(w mu)^beta} - 1) and
# lk(q) = ln(kappa - 1 + kappa / (e^{(q mu)^beta} - 1)), the three transforms
# reduce to softplus compositions:
#   h1(w, z) = softplus(z + le(w))^{1/beta} / mu
#   h2(w, z) = softplus(z + lk(w))^{1/beta} / mu
#   h3(p, q, r) = softplus(r/(r+1) le(p) + 1/(r+1) lk(q))^{1/beta} / mu
# so arguments up to ~1e3 never overflow.


def _le(w: np.ndarray, mu: float, beta: float) -> np.ndarray:
    return _log_expm1_array((w * mu) ** beta)


def _lk(q: np.ndarray, mu: float, beta: float, kappa: float) -> np.ndarray:
    log_km1 = math.log(kappa - 1.0) if kappa > 1.0 else -math.inf
    return np.logaddexp(log_km1, math.log(kappa) - _le(q, mu, beta))


def _h1(w: np.ndarray, z: float, mu: float, beta: float) -> np.ndarray:
    return _log1p_exp_array(z + _le(w, mu, beta)) ** (1.0 / beta) / mu


def _h2(w: np.ndarray, z: float, mu: float, beta: float, kappa: float) -> np.ndarray:
    return _log1p_exp_array(z + _lk(w, mu, beta, kappa)) ** (1.0 / beta) / mu


def _h3(
    p: np.ndarray, q: np.ndarray, r: float, mu: float, beta: float, kappa: float
) -> np.ndarray:
    blend = (r * _le(p, mu, beta) + _lk(q, mu, beta, kappa)) / (r + 1.0)
    return _log1p_exp_array(blend) ** (1.0 / beta) / mu


def h1(w, z: float, model: LossModel):
    """Intra-class transform {log(1 + e^z (e^{(w mu)^beta} - 1))}^{1/beta} / mu."""
    arr = np.asarray(w, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("h1 requires w >= 0")
    out = np.zeros_like(np.atleast_1d(arr))
    pos = np.atleast_1d(arr) > 0.0
    out[pos] = _h1(np.atleast_1d(arr)[pos], z, model.mu, model.beta)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def h2(w, z: float, model: LossModel, kappa: float):
    """Inter-class transform; singular at w = 0 where kappa/(e^0 - 1) diverges."""
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    arr = np.asarray(w, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("h2 requires w > 0 (singular limit at w = 0)")
    out = _h2(np.atleast_1d(arr), z, model.mu, model.beta, kappa)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def h3(p, q, r: float, model: LossModel, kappa: float):
    """Blended transform with exponents r/(r+1) and 1/(r+1) on the two factors."""
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if r == 0.0 or r == -1.0:
        raise ValueError("h3 requires r not in {0, -1}")
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    q_arr = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(p_arr < 0.0):
        raise ValueError("h3 requires p >= 0")
    if np.any(q_arr <= 0.0):
        raise ValueError("h3 requires q > 0")
    scalar = np.asarray(p, dtype=float).ndim == 0 and np.asarray(q, dtype=float).ndim == 0
    p_arr, q_arr = np.broadcast_arrays(p_arr, q_arr)
    with np.errstate(invalid="ignore"):
        out = _h3(p_arr.astype(float), q_arr.astype(float), r, model.mu, model.beta, kappa)
    # p = 0 makes the first factor 0^positive = 0, hence h3 = 0
    out = np.where(p_arr == 0.0, 0.0, out)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# ccdfs
# ---------------------------------------------------------------------------


def _clamp01(value: float, what: str) -> float:
    if value < 0.0 or value > 1.0:
        logger.debug("%s = %.17g clamped to [0, 1]", what, value)
    return min(1.0, max(0.0, value))


def intra_ccdf(
    nu: float,
    model: LossModel,
    cfg: QuadratureConfig = DEFAULT_QUAD_1D,
    *,
    clamp: bool = True,
) -> float:
    """P(projected squared intra-class distance > nu (C-1)); C-free by scaling.

    Equals 1 - int_0^inf (e^{-h1(a,-sqrt nu)} - e^{-h1(a,sqrt nu)}) e^{-a} da.
    """
    if nu < 0.0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    if nu == 0.0:
        return 1.0
    s = math.sqrt(nu)
    mu, beta = model.mu, model.beta

    def integrand(a: np.ndarray) -> np.ndarray:
        le = _le(a, mu, beta)
        lo = _log1p_exp_array(-s + le) ** (1.0 / beta) / mu
        hi = _log1p_exp_array(s + le) ** (1.0 / beta) / mu
        return np.exp(-lo) - np.exp(-hi)

    raw = 1.0 - integrate_expweighted(integrand, cfg)
    return _clamp01(raw, f"intra_ccdf(nu={nu})") if clamp else raw


def inter_ccdf_lower(
    nu: float,
    model: LossModel,
    config: ClassConfig,
    cfg: QuadratureConfig = DEFAULT_QUAD_1D,
    *,
    clamp: bool = True,
) -> float:
    """Lower bound on P(projected squared inter-class distance > nu (C-1))."""
    if nu < 0.0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    if nu == 0.0:
        return 1.0
    s = math.sqrt(nu)
    mu, beta, kappa = model.mu, model.beta, config.kappa

    def integrand(a: np.ndarray) -> np.ndarray:
        lk = _lk(a, mu, beta, kappa)
        lo = _log1p_exp_array(-s + lk) ** (1.0 / beta) / mu
        hi = _log1p_exp_array(s + lk) ** (1.0 / beta) / mu
        return np.exp(-lo) - np.exp(-hi)

    raw = 1.0 - integrate_expweighted(integrand, cfg)
    return _clamp01(raw, f"inter_ccdf_lower(nu={nu})") if clamp else raw


# ---------------------------------------------------------------------------
# b_A and the concentration grid search
# ---------------------------------------------------------------------------

_GAMMA_ONE_GUARD = 1e-9


def b_A(
    gamma: float,
    model: LossModel,
    config: ClassConfig,
    cfg: QuadratureConfig = DEFAULT_QUAD_2D,
    *,
    clamp: bool = True,
) -> float:
    """Lower bound on P(projected inter^2 > gamma * projected intra^2).

    The double integral of |e^{-h3(a1,a2,-sqrt gamma)} - e^{-h3(a1,a2,sqrt gamma)}|
    under the Exp(1) x Exp(1) weight.  gamma must exceed 1; gamma == 1 is
    evaluated at the guarded limit 1 + 1e-9.
    """
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    gamma = max(gamma, 1.0 + _GAMMA_ONE_GUARD)
    mu, beta, kappa = model.mu, model.beta, config.kappa
    r = math.sqrt(gamma)
    inv_beta = 1.0 / beta

    def integrand(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
        le1 = _le(a1, mu, beta)
        lk2 = _lk(a2, mu, beta, kappa)
        h_pos = _log1p_exp_array((r * le1 + lk2) / (r + 1.0)) ** inv_beta / mu
        h_neg = _log1p_exp_array((-r * le1 + lk2) / (-r + 1.0)) ** inv_beta / mu
        return np.abs(np.exp(-h_neg) - np.exp(-h_pos))

    # the |.| kink sits on le(a1) == lk(a2); split panels there exactly
    log_km1 = math.log(kappa - 1.0) if kappa > 1.0 else -math.inf

    def inner_kink(a1: float) -> tuple:
        le1 = float(_le(np.atleast_1d(a1), mu, beta)[0])
        if le1 <= log_km1:
            return ()
        # solve lk(a2) = le1:  e^{(a2 mu)^beta} - 1 = kappa / (e^{le1} - kappa + 1)
        log_t = math.log(kappa) - (le1 + math.log1p(-(kappa - 1.0) * math.exp(-le1)))
        x2 = log_t if log_t > 36.0 else math.log1p(math.exp(log_t))
        return (x2**inv_beta / mu,)

    outer_breaks = ()
    if kappa > 1.0:
        outer_breaks = (math.log(kappa) ** inv_beta / mu,)

    raw = integrate_expweighted_2d(
        integrand, cfg, outer_breakpoints=outer_breaks, inner_breakpoints=inner_kink
    )
    return _clamp01(raw, f"b_A(gamma={gamma})") if clamp else raw


def _eps_grid(grid_step: float) -> list[float]:
    if not 0.0 < grid_step < 1.0:
        raise ValueError(f"grid_step must lie in (0, 1), got {grid_step}")
    grid = []
    i = 1
    while i * grid_step < 1.0 - 1e-12:
        grid.append(i * grid_step)
        i += 1
    if len(grid) < 2:
        raise ValueError(f"grid_step {grid_step} leaves fewer than 2 interior points")
    return grid


def _concentration_mass(eps1: float, eps2: float, num_classes: int) -> float:
    """Chi-squared envelope mass from the exponential tail inequalities."""
    k = num_classes - 1
    upper = math.exp(-0.5 * k * (1.0 + eps1 - math.sqrt(1.0 + 2.0 * eps1)))
    lower = math.exp(-0.25 * k * eps2 * eps2)
    return 1.0 - upper - lower


def _grid_max(
    gamma: float,
    model: LossModel,
    config: ClassConfig,
    eps1_grid: Sequence[float],
    eps2_grid: Sequence[float],
    method: BoundMethod,
    cfg: QuadratureConfig,
    cache: dict[float, float] | None = None,
    initial: tuple[float, float, float] | None = None,
) -> tuple[float, float, float]:
    """Maximize b_A(gamma') * mass over the grid; returns (value, eps1, eps2).

    Pairs are visited in decreasing order of the chi-squared mass.  Two
    prunes keep the scan short: b_A <= 1 ends it once the mass drops below
    the best value, and monotonicity of b_A in gamma' skips any pair whose
    mass times the tightest b_A evaluated at a smaller gamma' cannot win.
    """
    pairs = []
    for e1 in eps1_grid:
        for e2 in eps2_grid:
            if method == "chi2_cdf":
                mass = chi2_cdf_scaled(config.num_classes, 1.0 + e1) - chi2_cdf_scaled(
                    config.num_classes, 1.0 - e2
                )
            else:
                mass = _concentration_mass(e1, e2, config.num_classes)
            pairs.append((mass, e1, e2))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))

    cache = {} if cache is None else cache
    evaluated = sorted(cache.items())  # (gamma', b_A) sorted by gamma'

    def ba_at(g: float) -> float:
        if g not in cache:
            cache[g] = b_A(g, model, config, cfg)
            bisect.insort(evaluated, (g, cache[g]))
        return cache[g]

    def ba_ceiling(g: float) -> float:
        # b_A is nonincreasing in gamma': the value at any smaller gamma' caps it
        i = bisect.bisect_right(evaluated, (g, math.inf))
        return evaluated[i - 1][1] if i else 1.0

    if initial is None:
        best = -math.inf
        best_pair = (pairs[0][1], pairs[0][2])
    else:
        best, best_pair = initial[0], (initial[1], initial[2])
    for mass, e1, e2 in pairs:
        if mass <= best:
            break
        g = gamma * (1.0 + e1) / (1.0 - e2)
        if mass * ba_ceiling(g) <= best:
            continue
        value = ba_at(g) * mass
        if value > best:
            best, best_pair = value, (e1, e2)
    return best, best_pair[0], best_pair[1]


def b(
    gamma: float,
    model: LossModel,
    config: ClassConfig,
    grid_step: float = 0.1,
    method: BoundMethod = "chi2_cdf",
    cfg: QuadratureConfig = DEFAULT_QUAD_2D,
    *,
    refine: bool = False,
) -> BoundResult:
    """Lower bound on P(inter^2 > gamma * intra^2) for raw feature distances.

    Maximizes b_A(gamma (1+eps1)/(1-eps2)) times the chi-squared mass of the
    concentration window over eps1, eps2 on the ``grid_step`` lattice in
    (0, 1).  ``method`` selects the exact chi-squared cdf difference or the
    exponential-tail concentration form.  ``refine`` adds one grid_step/10
    refinement pass around the coarse argmax.
    """
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    if method not in ("chi2_cdf", "concentration"):
        raise ValueError(f"unknown method {method!r}")
    grid = _eps_grid(grid_step)
    cache: dict[float, float] = {}
    value, e1, e2 = _grid_max(gamma, model, config, grid, grid, method, cfg, cache)
    if refine:
        sub = grid_step / 10.0
        fine1 = [e1 + i * sub for i in range(-10, 11) if 0.0 < e1 + i * sub < 1.0]
        fine2 = [e2 + i * sub for i in range(-10, 11) if 0.0 < e2 + i * sub < 1.0]
        value, e1, e2 = _grid_max(
            gamma, model, config, fine1, fine2, method, cfg, cache, initial=(value, e1, e2)
        )
    return BoundResult(
        value=_clamp01(value, f"b(gamma={gamma})"), eps1=e1, eps2=e2, method=method, gamma=gamma
    )


def b_c(
    model: LossModel,
    config: ClassConfig,
    grid_step: float = 0.1,
    method: BoundMethod = "chi2_cdf",
    cfg: QuadratureConfig = DEFAULT_QUAD_2D,
    *,
    refine: bool = False,
) -> BoundResult:
    """The gamma = 1 case of ``b``: P(inter-class distance > intra-class)."""
    return b(1.0, model, config, grid_step, method, cfg, refine=refine)


def expected_accuracy(loss: float, beta: float, kappa_star: float) -> float:
    """Expected per-class accuracy 1 - exp(-(Gamma(beta+1) log(1+kappa*) / L)^{1/beta}).

    kappa_star = 1 gives the universal lower bound valid for any class.
    """
    if not loss > 0.0:
        raise ValueError(f"loss must be positive, got {loss}")
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if kappa_star < 1.0:
        raise ValueError(f"kappa_star must be >= 1, got {kappa_star}")
    exponent = (math.exp(log_gamma(beta + 1.0)) * math.log1p(kappa_star) / loss) ** (1.0 / beta)
    return 1.0 - math.exp(-exponent)


# ---------------------------------------------------------------------------
# Sweeps (grid-ordered, optionally threaded)
# ---------------------------------------------------------------------------


def _map_ordered(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def ccdf_sweep(
    kind: CcdfKind,
    nu_grid: Iterable[float],
    model: LossModel,
    config: ClassConfig | None = None,
    cfg: QuadratureConfig = DEFAULT_QUAD_1D,
    threads: int = 1,
) -> CcdfCurve:
    """Evaluate one ccdf kind on an ordered nu grid."""
    nu_values = tuple(float(v) for v in nu_grid)
    if not nu_values:
        raise ValueError("nu grid must be nonempty")
    if kind == "intra":
        fn = lambda nu: intra_ccdf(nu, model, cfg)
    elif kind == "inter_lower":
        if config is None:
            raise ValueError("inter_lower ccdf needs a ClassConfig")
        fn = lambda nu: inter_ccdf_lower(nu, model, config, cfg)
    else:
        raise ValueError(f"unknown ccdf kind {kind!r}")
    probs = tuple(_map_ordered(fn, nu_values, threads))
    return CcdfCurve(nu_values=nu_values, probabilities=probs, kind=kind)


def ba_sweep(
    gamma_grid: Iterable[float],
    model: LossModel,
    config: ClassConfig,
    cfg: QuadratureConfig = DEFAULT_QUAD_2D,
    threads: int = 1,
) -> list[tuple[float, float]]:
    """Rows (gamma, b_A(gamma)) over an ordered gamma grid."""
    gammas = [float(g) for g in gamma_grid]
    if not gammas:
        raise ValueError("gamma grid must be nonempty")
    values = _map_ordered(lambda g: b_A(g, model, config, cfg), gammas, threads)
    return list(zip(gammas, values))


def bc_sweep(
    loss_grid: Iterable[float],
    beta: float,
    class_counts: Iterable[int],
    grid_step: float = 0.1,
    method: BoundMethod = "chi2_cdf",
    cfg: QuadratureConfig = DEFAULT_QUAD_2D,
    threads: int = 1,
    kappa_scale: float = 1.0,
) -> list[tuple[float, int, float]]:
    """Rows (L, C, b_c) over a loss grid for each class count.

    kappa is C-1 scaled by ``kappa_scale`` (1.0 reproduces the symmetric
    default).
    """
    losses = [float(x) for x in loss_grid]
    counts = [int(c) for c in class_counts]
    if not losses or not counts:
        raise ValueError("grids must be nonempty")
    tasks = [(L, C) for L in losses for C in counts]

    def run(task):
        L, C = task
        model = LossModel(loss=L, beta=beta)
        config = ClassConfig(num_classes=C, kappa=max(1.0, kappa_scale * (C - 1)))
        return b_c(model, config, grid_step, method, cfg).value

    values = _map_ordered(run, tasks, threads)
    return [(L, C, v) for (L, C), v in zip(tasks, values)]
