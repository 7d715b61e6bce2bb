"""Data model and likelihood for two Weibull groups under joint progressive
type-II censoring.

Two groups of sizes ``m`` and ``n`` are put on test together.  At each of
``k`` observed failure times a prescribed number ``R_j`` of surviving units
is withdrawn, ``s_j`` of them from group 1.  A sample therefore consists of
the ordered failure times, indicators of which group failed, and the
withdrawal splits.  Both groups share the Weibull shape ``alpha``; the
scale structure enters only through the two weighted power sums

    U(a) = sum_j s_j t_j^a + sum_{group-1 failures} t_j^a
    V(a) = sum_j w_j t_j^a + sum_{group-2 failures} t_j^a

with ``w_j = R_j - s_j``, and the log-likelihood is

    k ln a + k1 ln l1 + k2 ln l2 + (a-1) sum ln t_j - l1 U(a) - l2 V(a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .rng import RngStream, sample_hypergeometric, sample_weibull

# Beyond this exponent, per-term powers t^a overflow a double and sums are
# carried out in the log domain instead.
_OVERFLOW_EXPONENT = 700.0


@dataclass(frozen=True)
class CensoringScheme:
    """Design of a joint progressive type-II experiment.

    ``R[j]`` is the number of survivors withdrawn at the j-th failure; the
    scheme exhausts both groups: ``sum(R) + k == m + n``.
    """

    m: int
    n: int
    k: int
    R: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "R", tuple(int(r) for r in self.R))
        if self.m < 1 or self.n < 1:
            raise ValueError("both group sizes must be positive")
        if not 1 <= self.k <= self.m + self.n:
            raise ValueError("k must lie in [1, m+n]")
        if len(self.R) != self.k:
            raise ValueError("R must list one withdrawal count per failure")
        if any(r < 0 for r in self.R):
            raise ValueError("withdrawal counts must be non-negative")
        if sum(self.R) != self.m + self.n - self.k:
            raise ValueError("withdrawals must exhaust the groups: sum(R) == m+n-k")


@dataclass(frozen=True)
class JpcObservation:
    """One failure epoch: time, group indicator (1 = group 1), and the
    number of group-1 units among the withdrawals at that epoch."""

    t: float
    delta: int
    s: int

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t > 0.0):
            raise ValueError("failure time must be a positive finite real")
        if self.delta not in (0, 1):
            raise ValueError("delta must be 0 or 1")
        if self.s < 0:
            raise ValueError("withdrawal split must be non-negative")


@dataclass(frozen=True)
class JointParams:
    """Common shape and the two group rates of the Weibull pair."""

    alpha: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("alpha", "lambda1", "lambda2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be a positive finite real")


@dataclass(frozen=True)
class JpcSample:
    """An observed censoring outcome, validated against its scheme.

    Construction replays the experiment's accounting: times strictly
    increase, every withdrawal is covered by the survivors present at that
    epoch, and both groups are exactly exhausted by the end.
    """

    scheme: CensoringScheme
    obs: tuple[JpcObservation, ...]

    def __post_init__(self):
        object.__setattr__(self, "obs", tuple(self.obs))
        sch = self.scheme
        if len(self.obs) != sch.k:
            raise ValueError("number of observations must equal k")
        alive1, alive2 = sch.m, sch.n
        prev = 0.0
        for j, o in enumerate(self.obs):
            if o.t <= prev:
                raise ValueError(f"failure times must strictly increase (epoch {j + 1})")
            prev = o.t
            if o.delta == 1:
                if alive1 < 1:
                    raise ValueError(f"group 1 exhausted before epoch {j + 1}")
                alive1 -= 1
            else:
                if alive2 < 1:
                    raise ValueError(f"group 2 exhausted before epoch {j + 1}")
                alive2 -= 1
            w = sch.R[j] - o.s
            if w < 0:
                raise ValueError(f"withdrawal split exceeds R at epoch {j + 1}")
            if o.s > alive1 or w > alive2:
                raise ValueError(f"withdrawals exceed survivors at epoch {j + 1}")
            alive1 -= o.s
            alive2 -= w
        if alive1 != 0 or alive2 != 0:
            raise ValueError("scheme does not exhaust both groups")

    @cached_property
    def t(self) -> np.ndarray:
        return np.array([o.t for o in self.obs])

    @cached_property
    def log_t(self) -> np.ndarray:
        return np.log(self.t)

    @cached_property
    def delta(self) -> np.ndarray:
        return np.array([o.delta for o in self.obs])

    @cached_property
    def s(self) -> np.ndarray:
        return np.array([o.s for o in self.obs])

    @cached_property
    def w(self) -> np.ndarray:
        return np.asarray(self.scheme.R) - self.s

    @cached_property
    def coef1(self) -> np.ndarray:
        """Weight of t_j^a inside U: withdrawals plus a group-1 failure."""
        return (self.s + self.delta).astype(float)

    @cached_property
    def coef2(self) -> np.ndarray:
        return (self.w + 1 - self.delta).astype(float)

    @cached_property
    def log_coef1(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.coef1)

    @cached_property
    def log_coef2(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.coef2)

    @property
    def k1(self) -> int:
        return int(self.delta.sum())

    @property
    def k2(self) -> int:
        return self.scheme.k - self.k1

    @cached_property
    def sum_log_t(self) -> float:
        return float(self.log_t.sum())


def _power_sum(log_coef: np.ndarray, log_t: np.ndarray, alpha: float) -> float:
    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    exponents = alpha * log_t
    if exponents.max() > _OVERFLOW_EXPONENT:
        return float(np.exp(logsumexp(log_coef + exponents)))
    with np.errstate(over="ignore"):
        return float(np.sum(np.exp(log_coef + exponents)))


def u_stat(sample: JpcSample, alpha: float) -> float:
    """Group-1 weighted power sum U(alpha); U(0) counts the group size m."""
    return _power_sum(sample.log_coef1, sample.log_t, float(alpha))


def v_stat(sample: JpcSample, alpha: float) -> float:
    """Group-2 weighted power sum V(alpha); V(0) counts the group size n."""
    return _power_sum(sample.log_coef2, sample.log_t, float(alpha))


def w_stat(sample: JpcSample, alpha: float) -> float:
    """min(U, V) at the given shape."""
    return min(u_stat(sample, alpha), v_stat(sample, alpha))


def log_u_stat(sample: JpcSample, alpha) -> np.ndarray:
    """ln U(alpha), stable for any exponent; vectorized over ``alpha``."""
    a = np.asarray(alpha, dtype=float)
    return logsumexp(sample.log_coef1 + a[..., None] * sample.log_t, axis=-1)


def log_v_stat(sample: JpcSample, alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    return logsumexp(sample.log_coef2 + a[..., None] * sample.log_t, axis=-1)


def log_likelihood(sample: JpcSample, params: JointParams) -> float:
    """Joint log-likelihood of the censoring outcome at ``params``."""
    k1, k2 = sample.k1, sample.k2
    k = sample.scheme.k
    a = params.alpha
    val = k * math.log(a) + (a - 1.0) * sample.sum_log_t
    if k1 > 0:
        val += k1 * math.log(params.lambda1)
    if k2 > 0:
        val += k2 * math.log(params.lambda2)
    val -= params.lambda1 * u_stat(sample, a)
    val -= params.lambda2 * v_stat(sample, a)
    return float(val)


def simulate_jpc(scheme: CensoringScheme, params: JointParams, rng: RngStream) -> JpcSample:
    """Run one experiment under the given design and parameters.

    Lifetimes are drawn by inversion; at each failure the withdrawal is
    split between groups hypergeometrically and the withdrawn units are
    removed uniformly at random, which is what makes later failure epochs
    carry the correct conditional law.  Exact lifetime ties (possible only
    through floating-point collision) are redrawn.
    """
    m, n = scheme.m, scheme.n
    life = np.empty(m + n)
    life[:m] = np.atleast_1d(sample_weibull(params.alpha, params.lambda1, rng, size=m))
    life[m:] = np.atleast_1d(sample_weibull(params.alpha, params.lambda2, rng, size=n))
    while True:
        order = np.sort(life)
        dup = np.flatnonzero(order[1:] == order[:-1])
        if dup.size == 0:
            break
        for v in order[dup]:
            hits = np.flatnonzero(life == v)[1:]
            for idx in hits:
                lam = params.lambda1 if idx < m else params.lambda2
                life[idx] = sample_weibull(params.alpha, lam, rng)
    alive = np.ones(m + n, dtype=bool)
    obs = []
    for r_j in scheme.R:
        pool = np.flatnonzero(alive)
        fail = pool[np.argmin(life[pool])]
        delta = 1 if fail < m else 0
        alive[fail] = False
        a1 = int(np.count_nonzero(alive[:m]))
        a2 = int(np.count_nonzero(alive[m:]))
        s_j = sample_hypergeometric(a1, a2, r_j, rng)
        g1 = np.flatnonzero(alive[:m])
        g2 = m + np.flatnonzero(alive[m:])
        alive[g1[rng.choice_without_replacement(a1, s_j)]] = False
        alive[g2[rng.choice_without_replacement(a2, r_j - s_j)]] = False
        obs.append(JpcObservation(t=float(life[fail]), delta=delta, s=s_j))
    return JpcSample(scheme=scheme, obs=tuple(obs))


def shift_sample(sample: JpcSample, shift: float) -> JpcSample:
    """Subtract a threshold from every failure time (new times must stay
    positive).  Useful when recorded values carry a known lower bound."""
    if shift == 0.0:
        return sample
    obs = tuple(
        JpcObservation(t=o.t - shift, delta=o.delta, s=o.s) for o in sample.obs
    )
    return JpcSample(scheme=sample.scheme, obs=obs)


def break_ties(values) -> np.ndarray:
    """Perturb exact ties by position-stable multiples of 1e-9.

    Estimation code needs strictly ordered epochs; recorded data sometimes
    carries duplicates at the printed precision.  The perturbation is a
    deterministic function of position so repeated runs agree bit for bit.
    """
    out = np.array(values, dtype=float)
    seen: dict[float, int] = {}
    for i, v in enumerate(out):
        c = seen.get(v, 0)
        if c:
            out[i] = v + c * 1e-9
        seen[v] = c + 1
    return out
