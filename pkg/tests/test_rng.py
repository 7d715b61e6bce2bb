from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid

from jointweibull.errors import NonIntegrableTargetError
from jointweibull.rng import (
    BetaGammaHyper,
    LogConcaveTarget,
    PiecewiseExpEnvelope,
    RngStream,
    beta_gamma_mean,
    beta_gamma_variance,
    build_static_envelope,
    log_beta_gamma_pdf,
    log_ordered_beta_gamma_pdf,
    sample_beta_gamma,
    sample_hypergeometric,
    sample_log_concave,
    sample_ordered_beta_gamma,
    sample_weibull,
    splitmix64,
    weibull_inverse_cdf,
)


def test_equal_addresses_replay() -> None:
    a = RngStream(11, 5).uniform(100)
    b = RngStream(11, 5).uniform(100)
    assert np.array_equal(a, b)


def test_distinct_counters_disagree() -> None:
    a = RngStream(11, 5).uniform(100)
    b = RngStream(11, 6).uniform(100)
    assert not np.array_equal(a, b)


def test_substream_equals_fresh_stream_at_shifted_counter() -> None:
    derived = RngStream(11, 3).substream(4).uniform(50)
    direct = RngStream(11, 7).uniform(50)
    assert np.array_equal(derived, direct)


def test_uniform_scalar_and_batch() -> None:
    s = RngStream(0, 0)
    u = s.uniform()
    assert isinstance(u, float) and 0.0 <= u < 1.0
    arr = s.uniform(7)
    assert arr.shape == (7,)


def test_splitmix64_is_a_stable_64_bit_mix() -> None:
    outs = [splitmix64(i) for i in range(1000)]
    assert len(set(outs)) == 1000
    assert all(0 <= o < 2**64 for o in outs)
    assert splitmix64(42) == splitmix64(42)
    # consecutive inputs land far apart
    gaps = [bin(outs[i] ^ outs[i + 1]).count("1") for i in range(999)]
    assert min(gaps) > 10


def test_weibull_quantile_roundtrip() -> None:
    u = np.linspace(0.01, 0.99, 50)
    for alpha, lam in [(0.7, 2.0), (1.0, 1.0), (3.4, 0.25)]:
        x = weibull_inverse_cdf(u, alpha, lam)
        cdf = -np.expm1(-lam * x**alpha)
        assert cdf == pytest.approx(u, abs=1e-12)


def test_weibull_sampler_matches_reference_law() -> None:
    """Inversion draws should follow weibull_min with scale lam**(-1/alpha)."""
    alpha, lam = 2.5, 0.8
    x = sample_weibull(alpha, lam, RngStream(314, 0), size=4000)
    assert np.all(x > 0.0)
    res = stats.kstest(x, stats.weibull_min(alpha, scale=lam ** (-1.0 / alpha)).cdf)
    assert res.pvalue > 1e-3


def test_gamma_rate_parameterization() -> None:
    draws = RngStream(9, 0).gamma(5.0, rate=2.0, size=200_000)
    se = math.sqrt(5.0 / 4.0 / draws.size)
    assert abs(draws.mean() - 2.5) < 4.0 * se


def _bg_grid_moments(hyper: BetaGammaHyper, hi: float = 40.0, n: int = 1200):
    """Quadrature moments of the rate-pair law, independent of the sampler."""
    grid = np.linspace(1e-6, hi, n)
    l1, l2 = np.meshgrid(grid, grid, indexing="ij")
    dens = np.exp(log_beta_gamma_pdf(l1, l2, hyper))
    mass = trapezoid(trapezoid(dens, grid, axis=1), grid)
    m1 = trapezoid(trapezoid(dens * l1, grid, axis=1), grid)
    m2 = trapezoid(trapezoid(dens * l2, grid, axis=1), grid)
    v1 = trapezoid(trapezoid(dens * l1**2, grid, axis=1), grid)
    v2 = trapezoid(trapezoid(dens * l2**2, grid, axis=1), grid)
    return mass, m1, m2, v1 - m1**2, v2 - m2**2


def test_density_normalizes_and_matches_moment_formulas() -> None:
    hyper = BetaGammaHyper(3.0, 1.0, 2.0, 4.0)
    mass, m1, m2, v1, v2 = _bg_grid_moments(hyper)
    mean = beta_gamma_mean(hyper)
    var = beta_gamma_variance(hyper)
    assert mass == pytest.approx(1.0, abs=2e-3)
    assert m1 == pytest.approx(mean[0], rel=3e-3)
    assert m2 == pytest.approx(mean[1], rel=3e-3)
    assert v1 == pytest.approx(var[0], rel=1e-2)
    assert v2 == pytest.approx(var[1], rel=1e-2)


_BG_SETTINGS = [
    BetaGammaHyper(1.0, 1.0, 1.0, 1.0),
    BetaGammaHyper(3.0, 1.0, 2.0, 4.0),
    BetaGammaHyper(0.5, 2.0, 1.5, 0.5),
    BetaGammaHyper(10.0, 5.0, 3.0, 3.0),
    BetaGammaHyper(2.0, 0.5, 0.8, 1.2),
]


@pytest.mark.parametrize("hyper", _BG_SETTINGS, ids=lambda h: f"a0={h.a0},b0={h.b0}")
def test_rate_pair_sampler_moments(hyper: BetaGammaHyper) -> None:
    n = 100_000
    l1, l2 = sample_beta_gamma(hyper, RngStream(77, 0), size=n)
    mean = beta_gamma_mean(hyper)
    var = beta_gamma_variance(hyper)
    for draws, m, v in ((l1, mean[0], var[0]), (l2, mean[1], var[1])):
        assert abs(draws.mean() - m) < 4.0 * math.sqrt(v / n)


def test_ordered_sampler_respects_order_and_moments() -> None:
    hyper = BetaGammaHyper(3.0, 1.0, 2.0, 4.0)
    l1, l2 = sample_ordered_beta_gamma(hyper, RngStream(78, 0), size=60_000)
    assert np.all(l1 < l2)
    # quadrature over the wedge l1 < l2, inner grid aligned to the diagonal
    # so the support edge never cuts through a cell
    hi = 40.0
    grid = np.linspace(1e-6, hi, 900)
    inner = np.linspace(1e-9, 1.0, 900)
    g2 = grid[:, None] + (hi - grid[:, None]) * inner[None, :]
    g1 = np.broadcast_to(grid[:, None], g2.shape)
    dens = np.exp(log_ordered_beta_gamma_pdf(g1, g2, hyper))
    mass = trapezoid(trapezoid(dens, g2, axis=1), grid)
    m1 = trapezoid(trapezoid(dens * g1, g2, axis=1), grid)
    m2 = trapezoid(trapezoid(dens * g2, g2, axis=1), grid)
    assert mass == pytest.approx(1.0, abs=3e-3)
    assert l1.mean() == pytest.approx(m1, rel=0.02)
    assert l2.mean() == pytest.approx(m2, rel=0.02)


def test_ordered_density_is_the_symmetrized_unordered_one() -> None:
    hyper = BetaGammaHyper(2.0, 0.7, 1.3, 0.9)
    rng = RngStream(5, 0)
    pts = rng.uniform(40) * 3.0 + 0.05
    lo = np.minimum(pts[:20], pts[20:]) * 0.99
    hi = np.maximum(pts[:20], pts[20:]) + 0.01
    direct = np.exp(log_ordered_beta_gamma_pdf(lo, hi, hyper))
    folded = np.exp(log_beta_gamma_pdf(lo, hi, hyper)) + np.exp(
        log_beta_gamma_pdf(hi, lo, hyper)
    )
    assert direct == pytest.approx(folded, rel=1e-10)
    assert log_ordered_beta_gamma_pdf(hi, lo, hyper) == pytest.approx(-math.inf)


def test_sampler_requires_positive_hyperparameters() -> None:
    with pytest.raises(ValueError):
        sample_beta_gamma(BetaGammaHyper(0.0, 1.0, 1.0, 1.0), RngStream(1, 0), size=4)


def test_hypergeometric_matches_reference_frequencies() -> None:
    pop1, pop2, draws = 7, 5, 6
    rng = RngStream(21, 0)
    n = 20_000
    counts = np.bincount(
        [sample_hypergeometric(pop1, pop2, draws, rng) for _ in range(n)],
        minlength=pop1 + 1,
    )
    pmf = stats.hypergeom(pop1 + pop2, pop1, draws).pmf(np.arange(pop1 + 1))
    chi2 = ((counts - n * pmf) ** 2 / np.maximum(n * pmf, 1e-12))[pmf > 1e-9].sum()
    dof = int((pmf > 1e-9).sum()) - 1
    assert stats.chi2(dof).sf(chi2) > 1e-3


def test_hypergeometric_edge_cases() -> None:
    rng = RngStream(22, 0)
    assert sample_hypergeometric(4, 3, 0, rng) == 0
    assert sample_hypergeometric(4, 3, 7, rng) == 4
    assert sample_hypergeometric(4, 0, 3, rng) == 3
    assert sample_hypergeometric(0, 4, 3, rng) == 0


def _gamma_target(shape: float, rate: float) -> LogConcaveTarget:
    return LogConcaveTarget(
        log_density=lambda x: (shape - 1.0) * np.log(x) - rate * x,
        log_density_derivative=lambda x: (shape - 1.0) / x - rate,
    )


def test_static_envelope_dominates_target() -> None:
    """Tangent hulls of concave log-densities must sit above them everywhere."""
    rng = RngStream(31, 0)
    grid = np.linspace(1e-4, 30.0, 4000)
    for _ in range(30):
        shape = 1.0 + 4.0 * rng.uniform()
        rate = 0.2 + 3.0 * rng.uniform()
        env = build_static_envelope(_gamma_target(shape, rate), 0.0)
        target_log = (shape - 1.0) * np.log(grid) - rate * grid
        assert np.all(env.log_value(grid) >= target_log - 1e-9)


def test_envelope_mass_bounds_target_mass() -> None:
    shape, rate = 3.0, 2.0
    env = build_static_envelope(_gamma_target(shape, rate), 0.0)
    # unnormalized target mass: Gamma(shape) / rate**shape
    true_log_mass = math.lgamma(shape) - shape * math.log(rate)
    assert env.log_total_mass() >= true_log_mass
    assert env.log_total_mass() < true_log_mass + 0.5


def test_single_tangent_envelope_samples_exponential() -> None:
    env = PiecewiseExpEnvelope(0.0)
    env.insert(1.0, 0.0, -2.0)
    draws = env.sample(4000, RngStream(32, 0))
    res = stats.kstest(draws, stats.expon(scale=0.5).cdf)
    assert res.pvalue > 1e-3


def test_adaptive_sampler_half_normal() -> None:
    target = LogConcaveTarget(
        log_density=lambda x: -0.5 * x**2,
        log_density_derivative=lambda x: -x,
    )
    draws = sample_log_concave(target, 0.0, RngStream(33, 0), size=20_000)
    mean = math.sqrt(2.0 / math.pi)
    sd = math.sqrt(1.0 - 2.0 / math.pi)
    assert abs(draws.mean() - mean) < 4.0 * sd / math.sqrt(draws.size)
    res = stats.kstest(draws, lambda x: 2.0 * stats.norm.cdf(x) - 1.0)
    assert res.pvalue > 1e-3


def test_adaptive_sampler_gamma_target() -> None:
    draws = sample_log_concave(_gamma_target(3.0, 2.0), 0.0, RngStream(34, 0), size=20_000)
    assert abs(draws.mean() - 1.5) < 4.0 * math.sqrt(0.75 / draws.size)
    res = stats.kstest(draws, stats.gamma(3.0, scale=0.5).cdf)
    assert res.pvalue > 1e-3


def test_adaptive_sampler_boundary_mode() -> None:
    """A log-density decreasing from the support edge (exponential law)."""
    target = LogConcaveTarget(
        log_density=lambda x: -np.asarray(x, dtype=float),
        log_density_derivative=lambda x: -np.ones_like(np.asarray(x, dtype=float)),
    )
    draws = sample_log_concave(target, 0.0, RngStream(35, 0), size=20_000)
    res = stats.kstest(draws, stats.expon.cdf)
    assert res.pvalue > 1e-3


def test_adaptive_sampler_scalar_and_empty() -> None:
    one = sample_log_concave(_gamma_target(2.0, 1.0), 0.0, RngStream(36, 0))
    assert isinstance(one, float) and one > 0.0
    none = sample_log_concave(_gamma_target(2.0, 1.0), 0.0, RngStream(36, 0), size=0)
    assert none.shape == (0,)
    with pytest.raises(ValueError):
        sample_log_concave(_gamma_target(2.0, 1.0), 0.0, RngStream(36, 0), size=-1)


def test_sampler_refuses_growing_log_density() -> None:
    target = LogConcaveTarget(
        log_density=lambda x: np.asarray(x, dtype=float),
        log_density_derivative=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    )
    with pytest.raises(NonIntegrableTargetError):
        sample_log_concave(target, 0.0, RngStream(37, 0), size=10)


def test_determinism_of_adaptive_sampler() -> None:
    a = sample_log_concave(_gamma_target(3.0, 2.0), 0.0, RngStream(40, 2), size=500)
    b = sample_log_concave(_gamma_target(3.0, 2.0), 0.0, RngStream(40, 2), size=500)
    assert np.array_equal(a, b)
