"""Seeded Monte-Carlo estimators for every probability the bounds module
computes analytically.

All estimators ride on the same reparameterization the closed forms use:
alpha ~ Exp(1) with 1/yhat = e^{(alpha mu)^beta}, so each event reduces to a
comparison of stable log-domain quantities.  Work is split across
counter-based streams; the per-stream event counts are reduced in stream
order, so estimates are bit-reproducible for a fixed (seed, n, n_streams).
"""

from __future__ import annotations

import math

import numpy as np

from .bounds import ClassConfig, LossModel, mu_from_loss
from .numerics import McEstimate, _log_expm1_array, rng_exponential, rng_normal

__all__ = [
    "mc_intra_ccdf",
    "mc_inter_ccdf",
    "mc_b_A",
    "mc_p_acc",
    "mc_chi2_tails",
]


def _stream_sizes(n: int, n_streams: int) -> list[int]:
    if n_streams < 1:
        raise ValueError(f"n_streams must be positive, got {n_streams}")
    base, extra = divmod(n, n_streams)
    return [base + (1 if s < extra else 0) for s in range(n_streams)]


def _check_n(n: int) -> None:
    if n < 1000:
        raise ValueError(f"need at least 1000 samples, got {n}")


def _estimate(count: int, n: int, seed: int) -> McEstimate:
    p = count / n
    return McEstimate(
        value=p, std_error=math.sqrt(p * (1.0 - p) / n), n_samples=n, seed=seed
    )


def _le_of_exp_draws(seed: int, stream: int, size: int, mu: float, beta: float) -> np.ndarray:
    """ln(e^{(alpha mu)^beta} - 1) for one stream of Exp(1) draws."""
    alpha = rng_exponential(seed, stream, size)
    return _log_expm1_array((alpha * mu) ** beta)


def mc_intra_ccdf(
    nu: float, model: LossModel, n: int = 10**6, seed: int = 0, n_streams: int = 1
) -> McEstimate:
    """Frequency of log^2((e^{(a1 mu)^beta}-1)/(e^{(a2 mu)^beta}-1)) > nu."""
    _check_n(n)
    if nu < 0.0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    mu, beta = model.mu, model.beta
    count = 0
    for s, size in enumerate(_stream_sizes(n, n_streams)):
        le1 = _le_of_exp_draws(seed, 2 * s, size, mu, beta)
        le2 = _le_of_exp_draws(seed, 2 * s + 1, size, mu, beta)
        count += int(np.count_nonzero((le1 - le2) ** 2 > nu))
    return _estimate(count, n, seed)


def _lk_of_exp_draws(
    seed: int, stream: int, size: int, mu: float, beta: float, kappa: float
) -> np.ndarray:
    """ln(kappa - 1 + kappa/(e^{(alpha mu)^beta} - 1)) for one stream."""
    le = _le_of_exp_draws(seed, stream, size, mu, beta)
    log_km1 = math.log(kappa - 1.0) if kappa > 1.0 else -math.inf
    return np.logaddexp(log_km1, math.log(kappa) - le)


def mc_inter_ccdf(
    nu: float,
    model: LossModel,
    config: ClassConfig,
    n: int = 10**6,
    seed: int = 0,
    n_streams: int = 1,
) -> McEstimate:
    """Frequency of the inter-class bound expression exceeding nu (C-1).

    Event: log^2((kappa-1 + kappa/(e^{(a' mu)^beta}-1)) / (e^{(a mu)^beta}-1)) > nu.
    """
    _check_n(n)
    if nu < 0.0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    mu, beta, kappa = model.mu, model.beta, config.kappa
    count = 0
    for s, size in enumerate(_stream_sizes(n, n_streams)):
        le = _le_of_exp_draws(seed, 2 * s, size, mu, beta)
        lk = _lk_of_exp_draws(seed, 2 * s + 1, size, mu, beta, kappa)
        count += int(np.count_nonzero((lk - le) ** 2 > nu))
    return _estimate(count, n, seed)


def mc_b_A(
    gamma: float,
    model: LossModel,
    config: ClassConfig,
    n: int = 10**6,
    seed: int = 0,
    n_streams: int = 1,
) -> McEstimate:
    """Frequency of q2 > gamma q1 over three i.i.d. Exp(1) draws per sample.

    q1 compares the anchor draw with the intra partner, q2 compares the same
    anchor with the inter partner; the frequency estimates exactly the double
    integral behind ``bounds.b_A``.
    """
    _check_n(n)
    if not gamma > 1.0:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    mu, beta, kappa = model.mu, model.beta, config.kappa
    count = 0
    for s, size in enumerate(_stream_sizes(n, n_streams)):
        le1 = _le_of_exp_draws(seed, 3 * s, size, mu, beta)
        le2 = _le_of_exp_draws(seed, 3 * s + 1, size, mu, beta)
        lk3 = _lk_of_exp_draws(seed, 3 * s + 2, size, mu, beta, kappa)
        q1 = (le1 - le2) ** 2
        q2 = (lk3 - le1) ** 2
        count += int(np.count_nonzero(q2 > gamma * q1))
    return _estimate(count, n, seed)


def mc_p_acc(
    loss: float,
    beta: float,
    kappa_star: float,
    n: int = 10**6,
    seed: int = 0,
    n_streams: int = 1,
) -> McEstimate:
    """Frequency of yhat > 1/(kappa* + 1) with yhat = e^{-(alpha mu)^beta}.

    Evaluated in the alpha domain: the event is alpha < log(1+kappa*)^{1/beta}/mu.
    """
    _check_n(n)
    if kappa_star < 1.0:
        raise ValueError(f"kappa_star must be >= 1, got {kappa_star}")
    mu = mu_from_loss(loss, beta)
    threshold = math.log1p(kappa_star) ** (1.0 / beta) / mu
    count = 0
    for s, size in enumerate(_stream_sizes(n, n_streams)):
        alpha = rng_exponential(seed, s, size)
        count += int(np.count_nonzero(alpha < threshold))
    return _estimate(count, n, seed)


def mc_chi2_tails(
    dof: int, eps: float, n: int = 10**6, seed: int = 0
) -> tuple[McEstimate, McEstimate]:
    """Empirical chi-squared tail masses beyond (1 +- eps) * dof.

    Samples chi-squared variables as sums of ``dof`` squared standard
    normals; returns (upper, lower) tail frequency estimates for comparison
    against the exponential concentration bounds.
    """
    _check_n(n)
    if dof < 1:
        raise ValueError(f"dof must be positive, got {dof}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    upper_count = 0
    lower_count = 0
    chunk = max(1, 2**22 // dof)  # bound the normals matrix to ~32 MB
    done = 0
    stream = 0
    while done < n:
        size = min(chunk, n - done)
        z = rng_normal(seed, stream, size * dof).reshape(size, dof)
        x = np.einsum("ij,ij->i", z, z)
        upper_count += int(np.count_nonzero(x >= (1.0 + eps) * dof))
        lower_count += int(np.count_nonzero(x <= (1.0 - eps) * dof))
        done += size
        stream += 1
    return _estimate(upper_count, n, seed), _estimate(lower_count, n, seed)
