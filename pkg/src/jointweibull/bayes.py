"""Importance-sampled posterior inference for the joint censoring model.

Priors
------
The rate pair carries a beta-gamma law (total rate gamma, split beta),
optionally restricted to ``lambda1 < lambda2``; the shape carries an
independent gamma.  All hyperparameters may be zero, which yields the
usual flat limits; properness of the resulting posterior is then a
property of the data and is checked, not assumed.

Sampling strategy
-----------------
Integrating the rates out of the joint posterior leaves a shape marginal

    s(a) = (k + a0s - 1) ln a - a (b0s - sum ln t) - c * ln(b0 + W(a)),

with ``W = min(U, V)`` and ``c`` the updated total-rate shape.  Replacing
W by U or V gives two genuinely log-concave "branch" functions (each is a
negative log-sum-exp of affine functions plus concave terms) and
``s = max(branch_U, branch_V)`` pointwise.  The max of two concave
functions is not concave: where U and V cross, s has a convex kink, so a
single adaptive-rejection pass cannot be trusted.  Instead each branch
gets its own static tangent envelope; proposals come from the mass-
weighted mixture of the two envelopes and are accepted with probability

    exp(s(a)) / (exp(E_U(a)) + exp(E_V(a))) <= 1 ,

which is an exact rejection scheme because the mixture density is
proportional to ``exp(E_U) + exp(E_V)`` and that sum dominates
``exp(max(branch_U, branch_V))`` everywhere.  No quadrature enters, so
draws are exact up to floating point.

Given a shape draw the rates are conjugate: total rate gamma, split beta
(sorted for the order-restricted model), and the leftover likelihood
factor supplies the importance weight ``g``; for the unrestricted model
``g`` lies in (0, 1] by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateWeightsError, ImproperPosteriorError
from .gof import CompleteSample, _ks_rowwise, _ks_sorted
from .jpc import JointParams, JpcSample, simulate_jpc
from .mle import IntervalEstimate
from .rng import (
    BetaGammaHyper,
    LogConcaveTarget,
    PiecewiseExpEnvelope,
    RngStream,
    build_static_envelope,
)

_TAIL_PROBE = 1e8
_TAIL_SLOPE_TOL = -1e-12


@dataclass(frozen=True)
class ShapeHyper:
    """Gamma hyperparameters (shape ``a``, rate ``b``) for the Weibull shape."""

    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and non-negative")


@dataclass(frozen=True)
class PriorSpec:
    """Complete prior: beta-gamma on the rates, gamma on the shape, and a
    flag selecting the order-restricted variant."""

    bg: BetaGammaHyper
    shape: ShapeHyper
    ordered: bool = False

    @classmethod
    def flat(cls, shape_rate: float = 0.0, ordered: bool = False) -> "PriorSpec":
        """All hyperparameters zero except an optional rate on the shape."""
        return cls(
            bg=BetaGammaHyper(0.0, 0.0, 0.0, 0.0),
            shape=ShapeHyper(0.0, shape_rate),
            ordered=ordered,
        )


@dataclass
class WeightedPosterior:
    """Importance-weighted posterior draws of (alpha, lambda1, lambda2).

    ``weights`` holds the raw importance factors g (unit weights mean the
    draws are exact); ``normalized`` always sums to one.  ``low_ess`` is
    set when the effective sample size 1/sum(normalized^2) falls below one
    percent of the number of draws.
    """

    alpha: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    weights: np.ndarray
    normalized: np.ndarray
    low_ess: bool = False

    def __post_init__(self):
        sizes = {
            np.asarray(a).shape
            for a in (self.alpha, self.lambda1, self.lambda2, self.weights, self.normalized)
        }
        if len(sizes) != 1:
            raise ValueError("all draw arrays must share one shape")
        if np.any(self.normalized < 0.0) or abs(float(self.normalized.sum()) - 1.0) > 1e-9:
            raise ValueError("normalized weights must be a probability vector")

    @property
    def n_draws(self) -> int:
        return int(np.asarray(self.alpha).size)

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.normalized**2))


class _Branch:
    """One concave branch of the shape marginal: U- or V-flavored."""

    def __init__(self, log_coef: np.ndarray, log_t: np.ndarray, c0: float, c1: float, c2: float, log_b0: float):
        self.log_coef = log_coef
        self.log_t = log_t
        self.c0 = c0
        self.c1 = c1
        self.c2 = c2
        self.log_b0 = log_b0

    def log_sum(self, alpha: np.ndarray) -> np.ndarray:
        return logsumexp(self.log_coef + alpha[..., None] * self.log_t, axis=-1)

    def value(self, alpha):
        a = np.asarray(alpha, dtype=float)
        scalar = a.ndim == 0
        a = np.atleast_1d(a)
        with np.errstate(divide="ignore"):
            lead = self.c0 * np.log(a) if self.c0 != 0.0 else np.zeros_like(a)
        out = lead - self.c1 * a - self.c2 * np.logaddexp(self.log_b0, self.log_sum(a))
        return float(out[0]) if scalar else out

    def derivative(self, alpha):
        a = np.asarray(alpha, dtype=float)
        scalar = a.ndim == 0
        a = np.atleast_1d(a)
        logits = self.log_coef + a[..., None] * self.log_t
        top = logits.max(axis=-1, keepdims=True)
        wgt = np.exp(logits - top)
        mean_lnt = (wgt * self.log_t).sum(axis=-1) / wgt.sum(axis=-1)
        ln_sum = top[..., 0] + np.log(wgt.sum(axis=-1))
        damp = np.exp(ln_sum - np.logaddexp(self.log_b0, ln_sum))
        out = self.c0 / a - self.c1 - self.c2 * damp * mean_lnt
        return float(out[0]) if scalar else out


def _envelope_rejection(
    log_target: Callable[[np.ndarray], np.ndarray],
    envelopes: Sequence[PiecewiseExpEnvelope],
    n: int,
    rng: RngStream,
) -> np.ndarray:
    """Exact draws from exp(log_target) dominated by a sum of envelopes."""
    log_masses = np.array([env.log_total_mass() for env in envelopes])
    mix = np.exp(log_masses - logsumexp(log_masses))
    cum = np.cumsum(mix)
    out = np.empty(n)
    have = 0
    proposed = 0
    accepted = 0
    rate = 0.45
    guard = 0
    while have < n:
        guard += 1
        if guard > 10000:
            raise ImproperPosteriorError("shape sampler stalled; acceptance is vanishing")
        chunk = int((n - have) / rate) + 8
        q = np.empty(chunk)
        if len(envelopes) == 1:
            q = envelopes[0].sample(chunk, rng)
        else:
            pick = np.searchsorted(cum, rng.uniform(chunk), side="left")
            pick = np.clip(pick, 0, len(envelopes) - 1)
            for b, env in enumerate(envelopes):
                idx = np.flatnonzero(pick == b)
                if idx.size:
                    q[idx] = env.sample(idx.size, rng)
        log_env = envelopes[0].log_value(q)
        for env in envelopes[1:]:
            log_env = np.logaddexp(log_env, env.log_value(q))
        accept = np.log(np.clip(rng.uniform(chunk), 1e-300, None)) <= log_target(q) - log_env
        taken = q[accept]
        n_take = min(taken.size, n - have)
        out[have : have + n_take] = taken[:n_take]
        have += n_take
        proposed += chunk
        accepted += int(accept.sum())
        rate = max(0.05, accepted / proposed)
    return out


class _PosteriorCore:
    """Shared machinery behind every posterior in this module.

    A core is defined by the two weighted power sums (as log-coefficient /
    log-time arrays), the failure counts, and the prior.  It owns the shape
    marginal, its properness checks, the dual-envelope sampler, and the
    conjugate rate updates.
    """

    def __init__(
        self,
        log_coef_u: np.ndarray,
        log_t_u: np.ndarray,
        log_coef_v: np.ndarray,
        log_t_v: np.ndarray,
        k1: int,
        k2: int,
        sum_log_t: float,
        prior: PriorSpec,
    ):
        self.prior = prior
        self.k1 = k1
        self.k2 = k2
        k = k1 + k2
        bg = prior.bg
        if prior.ordered:
            j = min(k1, k2)
            self.gamma_shape = bg.a0 + 2.0 * j
            self.beta_a = bg.a1 + j
            self.beta_b = bg.a2 + j
            self.j = j
        else:
            self.gamma_shape = bg.a0 + k
            self.beta_a = bg.a1 + k1
            self.beta_b = bg.a2 + k2
            self.j = None
        if min(self.gamma_shape, self.beta_a, self.beta_b) <= 0.0:
            raise ImproperPosteriorError(
                "rate posterior is improper: a flat hyperparameter meets a zero count"
            )
        c0 = k + prior.shape.a - 1.0
        c1 = prior.shape.b - sum_log_t
        c2 = self.gamma_shape
        log_b0 = math.log(bg.b0) if bg.b0 > 0.0 else -math.inf
        self.log_b0 = log_b0
        self.branch_u = _Branch(log_coef_u, log_t_u, c0, c1, c2, log_b0)
        self.branch_v = _Branch(log_coef_v, log_t_v, c0, c1, c2, log_b0)
        for br in (self.branch_u, self.branch_v):
            if br.derivative(_TAIL_PROBE) >= _TAIL_SLOPE_TOL:
                raise ImproperPosteriorError(
                    "shape marginal does not decay at the upper probe point"
                )

    @classmethod
    def from_jpc(cls, sample: JpcSample, prior: PriorSpec) -> "_PosteriorCore":
        return cls(
            sample.log_coef1,
            sample.log_t,
            sample.log_coef2,
            sample.log_t,
            sample.k1,
            sample.k2,
            sample.sum_log_t,
            prior,
        )

    @classmethod
    def from_two_complete(
        cls, data1: CompleteSample, data2: CompleteSample, prior: PriorSpec
    ) -> "_PosteriorCore":
        return cls(
            np.zeros(data1.n),
            data1.log_values,
            np.zeros(data2.n),
            data2.log_values,
            data1.n,
            data2.n,
            data1.sum_log + data2.sum_log,
            prior,
        )

    def log_marginal(self, alpha):
        a = np.asarray(alpha, dtype=float)
        scalar = a.ndim == 0
        a = np.atleast_1d(a)
        out = np.maximum(self.branch_u.value(a), self.branch_v.value(a))
        return float(out[0]) if scalar else out

    @cached_property
    def _envelopes(self) -> tuple[float, PiecewiseExpEnvelope, PiecewiseExpEnvelope]:
        # one common vertical shift keeps both envelopes on a comparable
        # scale without disturbing acceptance ratios
        probe = np.geomspace(1e-3, 1e3, 61)
        peak = float(np.max(self.log_marginal(probe)))
        shifted = [
            LogConcaveTarget((lambda a, f=br.value: f(a) - peak), br.derivative)
            for br in (self.branch_u, self.branch_v)
        ]
        env_u = build_static_envelope(shifted[0], 0.0)
        env_v = build_static_envelope(shifted[1], 0.0)
        return peak, env_u, env_v

    def sample_shape(self, n: int, rng: RngStream) -> np.ndarray:
        peak, env_u, env_v = self._envelopes

        def target(q: np.ndarray) -> np.ndarray:
            return self.log_marginal(q) - peak

        return _envelope_rejection(target, (env_u, env_v), n, rng)

    def draw(self, n: int, rng: RngStream) -> WeightedPosterior:
        alpha = self.sample_shape(n, rng)
        ln_u = self.branch_u.log_sum(alpha)
        ln_v = self.branch_v.log_sum(alpha)
        ln_w = np.minimum(ln_u, ln_v)
        rate = np.exp(np.minimum(np.logaddexp(self.log_b0, ln_u), np.logaddexp(self.log_b0, ln_v)))
        total = rng.gamma(self.gamma_shape, rate=rate)
        frac = rng.beta(self.beta_a, self.beta_b, size=n)
        l1 = frac * total
        l2 = (1.0 - frac) * total
        if self.prior.ordered:
            l1, l2 = np.minimum(l1, l2), np.maximum(l1, l2)
            while True:
                tied = l1 == l2
                if not tied.any():
                    break
                m = int(tied.sum())
                t2 = rng.gamma(self.gamma_shape, rate=rate[tied])
                f2 = rng.beta(self.beta_a, self.beta_b, size=m)
                l1[tied] = np.minimum(f2, 1.0 - f2) * t2
                l2[tied] = np.maximum(f2, 1.0 - f2) * t2
        # leftover likelihood factor: exp(-l1 (U - W) - l2 (V - W)), computed
        # as W expm1(ln U - ln W) to dodge cancellation between huge sums
        du = ln_u - ln_w
        dv = ln_v - ln_w
        with np.errstate(over="ignore", invalid="ignore"):
            w_val = np.exp(ln_w)
            ln_g = -np.where(du > 0.0, l1 * w_val * np.expm1(du), 0.0)
            ln_g -= np.where(dv > 0.0, l2 * w_val * np.expm1(dv), 0.0)
        if self.prior.ordered:
            if self.k1 - self.j:
                ln_g += (self.k1 - self.j) * np.log(l1)
            if self.k2 - self.j:
                ln_g += (self.k2 - self.j) * np.log(l2)
        if not np.any(ln_g > -math.inf):
            raise DegenerateWeightsError("every importance weight underflowed to zero")
        top = ln_g.max()
        normalized = np.exp(ln_g - top)
        normalized /= normalized.sum()
        with np.errstate(over="ignore"):
            weights = np.exp(ln_g)
        post = WeightedPosterior(
            alpha=alpha,
            lambda1=l1,
            lambda2=l2,
            weights=weights,
            normalized=normalized,
        )
        post.low_ess = post.ess < 0.01 * n
        return post


def log_marginal_shape(sample: JpcSample, prior: PriorSpec, alpha):
    """Unnormalized log of the shape marginal after the rates are
    integrated out; vectorized over ``alpha``."""
    core = _PosteriorCore.from_jpc(sample, prior)
    return core.log_marginal(alpha)


def draw_posterior(
    sample: JpcSample, prior: PriorSpec, n_draws: int, rng: RngStream
) -> WeightedPosterior:
    """Importance-weighted posterior draws for a censoring outcome.

    Raises :class:`ImproperPosteriorError` when either the rate update or
    the shape marginal fails its integrability check, which happens for
    flat priors when one group never fails.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    core = _PosteriorCore.from_jpc(sample, prior)
    return core.draw(n_draws, rng)


def draw_posterior_two_complete(
    data1: CompleteSample,
    data2: CompleteSample,
    prior: PriorSpec,
    n_draws: int,
    rng: RngStream,
) -> WeightedPosterior:
    """Posterior draws for two complete samples sharing one shape."""
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    core = _PosteriorCore.from_two_complete(data1, data2, prior)
    return core.draw(n_draws, rng)


def weibull_posterior_complete(
    data: CompleteSample,
    bg_a: float,
    bg_b: float,
    shape: ShapeHyper,
    n_draws: int,
    rng: RngStream,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact (unit-weight) posterior draws for one complete Weibull sample.

    The rate prior is gamma(bg_a, bg_b); zeros give the flat limit.  With a
    single population there is one power sum, hence one concave branch and
    no importance correction at all.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    n = data.n
    c0 = n + shape.a - 1.0
    c1 = shape.b - data.sum_log
    c2 = bg_a + n
    log_b0 = math.log(bg_b) if bg_b > 0.0 else -math.inf
    branch = _Branch(np.zeros(n), data.log_values, c0, c1, c2, log_b0)
    if branch.derivative(_TAIL_PROBE) >= _TAIL_SLOPE_TOL:
        raise ImproperPosteriorError("shape marginal does not decay at the upper probe point")
    probe = np.geomspace(1e-3, 1e3, 61)
    peak = float(np.max(branch.value(probe)))
    target = LogConcaveTarget(lambda a: branch.value(a) - peak, branch.derivative)
    env = build_static_envelope(target, 0.0)
    alpha = _envelope_rejection(lambda q: branch.value(q) - peak, (env,), n_draws, rng)
    rate = np.exp(np.logaddexp(log_b0, branch.log_sum(alpha)))
    lam = rng.gamma(c2, rate=rate)
    return alpha, lam


def bayes_estimate(post: WeightedPosterior, h: Callable) -> float:
    """Posterior mean of ``h(alpha, lambda1, lambda2)`` under the weights."""
    if post.normalized.sum() <= 0.0:
        raise DegenerateWeightsError("all importance weights are zero")
    vals = np.asarray(h(post.alpha, post.lambda1, post.lambda2), dtype=float)
    return float((post.normalized * vals).sum())


def weighted_hpd(values, normalized, level: float) -> IntervalEstimate:
    """Narrowest window of sorted draws straddling ``level`` mass.

    Windows are scanned over order statistics: a window [j1, j2] qualifies
    when its mass does not exceed ``level`` while extending it by one more
    draw would; windows ending at the last draw have no extension and never
    qualify.  Among qualifying windows the narrowest wins; ties go to the
    leftmost.  When no window qualifies (a single draw, or one atom heavier
    than ``level``) the interval degenerates to the heaviest draw.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    values = np.asarray(values, dtype=float)
    v = np.asarray(normalized, dtype=float)
    order = np.argsort(values, kind="stable")
    h = values[order]
    v = v[order]
    n = h.size
    c = np.concatenate([[0.0], np.cumsum(v)])
    # index e(i1) = last prefix index with mass(window) <= level; the
    # extension draw is then the atom at index e, which must exist
    e = np.searchsorted(c, c[:n] + level * (1.0 + 1e-12), side="right") - 1
    j2 = e - 1
    i1 = np.arange(n)
    valid = (j2 >= i1) & (e < n)
    if not valid.any():
        at = int(np.argmax(v))
        return IntervalEstimate(float(h[at]), float(h[at]), level)
    widths = np.where(valid, h[np.clip(j2, 0, n - 1)] - h[i1], math.inf)
    best = int(np.argmin(widths))
    return IntervalEstimate(float(h[best]), float(h[j2[best]]), level)


def hpd_interval(post: WeightedPosterior, h: Callable, level: float) -> IntervalEstimate:
    """HPD-style interval for ``h(alpha, lambda1, lambda2)``."""
    vals = np.asarray(h(post.alpha, post.lambda1, post.lambda2), dtype=float)
    return weighted_hpd(vals, post.normalized, level)


def _jpc_default_discrepancy(sample: JpcSample, params: JointParams) -> float:
    """Largest group-wise KS distance of observed failure times against the
    fitted lifetime laws (groups without failures contribute nothing)."""
    worst = 0.0
    for grp, lam in ((1, params.lambda1), (0, params.lambda2)):
        mask = sample.delta == grp
        if not mask.any():
            continue
        ts = np.sort(sample.t[mask])
        f = -np.expm1(-lam * ts**params.alpha)
        worst = max(worst, _ks_sorted(ts, f))
    return worst


def posterior_predictive_pvalue(
    data,
    prior: PriorSpec,
    discrepancy: Optional[Callable] = None,
    n_rep: int = 1000,
    rng: Optional[RngStream] = None,
    posterior: Optional[WeightedPosterior] = None,
):
    """Posterior predictive check; returns ``(p_value, expected_observed)``.

    For each posterior draw the observed discrepancy is computed at that
    draw's parameters; replicate datasets of the same design are simulated
    at parameters resampled proportionally to the importance weights, and
    the p-value is the fraction of replicates whose discrepancy is at least
    the observed one (ties count toward the fraction).  The second return
    value is the weighted posterior mean of the observed discrepancy.

    ``data`` may be a :class:`CompleteSample` (one population, default
    discrepancy: KS distance against the drawn parameters) or a
    :class:`JpcSample` (default: the larger of the two group-wise KS
    distances of observed failure times).
    """
    if rng is None:
        raise ValueError("an explicit RngStream is required")
    if n_rep < 1:
        raise ValueError("n_rep must be positive")
    if isinstance(data, CompleteSample):
        if posterior is None:
            alphas, lams = weibull_posterior_complete(
                data, prior.bg.a0, prior.bg.b0, prior.shape, n_rep, rng
            )
            norm = np.full(n_rep, 1.0 / n_rep)
        else:
            alphas = np.asarray(posterior.alpha)
            lams = np.asarray(posterior.lambda1)
            norm = np.asarray(posterior.normalized)
        n = data.n
        if discrepancy is None:
            f_obs = -np.expm1(-lams[:, None] * data.sorted**alphas[:, None])
            d_obs = _ks_rowwise(f_obs)
        else:
            d_obs = np.array([discrepancy(data, a, l) for a, l in zip(alphas, lams)])
        idx = _resample_indices(norm, n_rep, rng)
        u = rng.uniform((n_rep, n))
        reps = np.sort(
            (-np.log1p(-u) / lams[idx, None]) ** (1.0 / alphas[idx, None]), axis=1
        )
        if discrepancy is None:
            f_rep = -np.expm1(-lams[idx, None] * reps ** alphas[idx, None])
            d_rep = _ks_rowwise(f_rep)
        else:
            d_rep = np.array(
                [
                    discrepancy(CompleteSample(values=tuple(row)), alphas[i], lams[i])
                    for row, i in zip(reps, idx)
                ]
            )
        p = float(np.mean(d_rep >= d_obs[idx]))
        return p, float((norm * d_obs).sum())
    if isinstance(data, JpcSample):
        disc = discrepancy or _jpc_default_discrepancy
        post = posterior or draw_posterior(data, prior, n_rep, rng)
        params = [
            JointParams(float(a), float(l1), float(l2))
            for a, l1, l2 in zip(post.alpha, post.lambda1, post.lambda2)
        ]
        d_obs = np.array([disc(data, p) for p in params])
        idx = _resample_indices(post.normalized, n_rep, rng)
        hits = 0
        for i in idx:
            rep = simulate_jpc(data.scheme, params[i], rng)
            if disc(rep, params[i]) >= d_obs[i]:
                hits += 1
        return hits / n_rep, float((post.normalized * d_obs).sum())
    raise TypeError("data must be a CompleteSample or a JpcSample")


def _resample_indices(normalized: np.ndarray, n: int, rng: RngStream) -> np.ndarray:
    c = np.cumsum(normalized)
    c[-1] = 1.0
    return np.searchsorted(c, rng.uniform(n), side="left")
