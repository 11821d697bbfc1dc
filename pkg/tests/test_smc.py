import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from abcweight.smc import (FixedWeights, KernelSpec, Population, PriorSpec, Problem, SMCSettings,
                           accepted_count, importance_weight, perturb, run_abc_smc, sample_prior,
                           select_closest, select_m_closest)
from abcweight.summaries import WeightVector


def gaussian_problem(kappa=2, noise=0.1, observed=0.3):
    """Summary 1 is log10(theta) plus noise, the rest pure noise."""
    prior = PriorSpec(np.array([0.1]), np.array([10.0]))

    def simulate(theta, seeds):
        out = np.empty((len(seeds), kappa))
        for i, s in enumerate(seeds):
            g = np.random.default_rng(int(s))
            out[i] = g.normal(0, 1, kappa)
            out[i, 0] = np.log10(theta[i, 0]) + noise * out[i, 0]
        return out

    return Problem(prior, simulate, np.r_[observed, np.zeros(kappa - 1)], "gaussian")


def test_prior_sampling():
    prior = PriorSpec([1.0], [100.0])
    g = np.random.default_rng(0)
    theta = sample_prior(prior, g, 100_000)
    assert theta.min() >= 1 and theta.max() <= 100
    assert abs(np.log10(theta).mean() - 1.0) < 0.01
    assert stats.kstest(np.log10(theta[:, 0]), "uniform", args=(0, 2)).pvalue > 1e-3
    with pytest.raises(ValueError):
        PriorSpec([10.0], [10.0])
    with pytest.raises(ValueError):
        PriorSpec([0.0], [1.0])


def test_perturbation_sd_and_support():
    g = np.random.default_rng(1)
    theta = np.full((100_000, 1), 10.0)
    out = perturb(theta, KernelSpec.isotropic(0.25, 1), g)
    assert abs(np.log10(out).std() - 0.25) < 0.005
    prior = PriorSpec([1.0], [20.0])
    out = perturb(np.full((20_000, 1), 18.0), KernelSpec.isotropic(0.25, 1), g, prior)
    assert out.min() >= 1.0 and out.max() <= 20.0
    tiny = perturb(np.array([[3.0]]), KernelSpec.isotropic(1e-300, 1), g)
    assert tiny[0, 0] == 3.0
    with pytest.raises(ValueError):
        KernelSpec.isotropic(0.0, 1)


def test_importance_weight_hand_values():
    prior = PriorSpec([0.01], [100.0])
    kernel = KernelSpec.isotropic(0.25, 1)
    assert importance_weight([5.0], None, kernel, prior) == 1.0
    one = Population(1, np.array([[0.5]]), np.array([1.0]), np.zeros((1, 1)), np.zeros(1))
    two = Population(1, np.array([[0.5], [0.5]]), np.array([0.5, 0.5]), np.zeros((2, 1)),
                     np.zeros(2))
    theta = 10 ** 0.7
    expected = (1 / 4) / stats.norm.pdf(0.7, 0.5, 0.25)
    assert importance_weight([theta], one, kernel, prior) == pytest.approx(expected, rel=1e-12)
    assert importance_weight([theta], two, kernel, prior) == pytest.approx(expected, rel=1e-12)
    far = Population(1, np.array([[-2.0]]), np.array([1.0]), np.zeros((1, 1)), np.zeros(1))
    with pytest.raises(FloatingPointError):
        importance_weight([100.0], far, KernelSpec.isotropic(1e-3, 1), prior)


def test_select_closest_examples():
    assert select_closest(np.arange(1.0, 11.0), 0.5).tolist() == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        select_closest(np.arange(10.0), 0.05)
    assert select_closest(np.ones(10), 0.3).tolist() == [0, 1, 2]
    assert accepted_count(50_000, 0.005) == 250
    assert accepted_count(1000, 0.07) == 70


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 60), elements=st.integers(0, 8).map(float)),
       st.integers(1, 60))
def test_select_matches_stable_sort(d, m):
    m = min(m, d.size)
    expected = np.sort(np.argsort(d, kind="stable")[:m])
    assert np.array_equal(select_m_closest(d, m), expected)


def test_run_invariants():
    problem = gaussian_problem()
    settings_ = SMCSettings(2000, 0.05, generations=3, seed=4)
    pops = run_abc_smc(problem, settings_)
    assert [len(p) for p in pops] == [100, 100, 100]
    assert np.array_equal(pops[0].raw_v, np.ones(100))
    assert np.all(pops[0].v == 1 / 100)
    for p in pops:
        assert abs(p.v.sum() - 1) < 1e-12
        assert problem.prior.contains(p.log10_theta).all()
        assert np.all(np.isfinite(p.v)) and np.all(p.v >= 0)
    # later generations concentrate around the observed value
    assert np.median(pops[-1].distance) <= np.median(pops[0].distance)
    assert abs(np.sum(pops[-1].v * pops[-1].log10_theta[:, 0]) - 0.3) < 0.1


def test_run_is_reproducible_and_seed_sensitive():
    problem = gaussian_problem()
    a = run_abc_smc(problem, SMCSettings(1000, 0.05, 2, seed=9))
    b = run_abc_smc(problem, SMCSettings(1000, 0.05, 2, seed=9))
    c = run_abc_smc(problem, SMCSettings(1000, 0.05, 2, seed=10))
    for x, y in zip(a, b):
        assert np.array_equal(x.log10_theta, y.log10_theta) and np.array_equal(x.v, y.v)
    assert not np.array_equal(a[-1].log10_theta, c[-1].log10_theta)


def test_single_generation_is_rejection_sampling():
    problem = gaussian_problem()
    s = SMCSettings(1000, 0.1, 1, seed=2)
    pop = run_abc_smc(problem, s)[0]
    from abcweight import rng
    u = problem.prior.sample(rng.generator(2, 1, rng.PRIOR), 1000)
    S = problem.simulate(10 ** u, rng.simulation_seeds(2, 1000, 1, rng.SIMULATION))
    d = ((S - problem.observed) ** 2).mean(axis=1)
    keep = select_closest(d, 0.1)
    assert np.allclose(pop.log10_theta, u[keep], rtol=0, atol=1e-12)


def test_constant_weights_with_one_summary_match_any_scale():
    problem = gaussian_problem(kappa=1)
    a = run_abc_smc(problem, SMCSettings(1000, 0.05, 2, seed=3), FixedWeights([1.0]))
    b = run_abc_smc(problem, SMCSettings(1000, 0.05, 2, seed=3), FixedWeights(WeightVector([7.0])))
    assert np.array_equal(a[-1].log10_theta, b[-1].log10_theta)


def test_failed_simulations_are_rejected():
    base = gaussian_problem()

    def flaky(theta, seeds):
        S = base.simulate(theta, seeds)
        S[::3] = np.nan
        return S

    problem = Problem(base.prior, flaky, base.observed)
    pop = run_abc_smc(problem, SMCSettings(600, 0.1, 1, seed=1))[0]
    assert np.all(np.isfinite(pop.distance))
    assert pop.info["n_failed"] == 200


def test_settings_validation():
    with pytest.raises(ValueError):
        SMCSettings(10, 0.05)
    with pytest.raises(ValueError):
        SMCSettings(10, 1.5)
