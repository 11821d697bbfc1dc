import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from abcweight import models
from abcweight.models import ObservationSchedule, Trajectory
from abcweight.summaries import (WeightVector, summarize, summarize_batch, weighted_sq_distance,
                                 weighted_sq_distances)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_weight_vector_normalizes():
    w = WeightVector([2.0, 6.0])
    assert np.allclose(w.weights, [0.25, 0.75])
    assert WeightVector.uniform(4).weights.tolist() == [0.25] * 4
    with pytest.raises(ValueError):
        WeightVector([0.0, 0.0])
    with pytest.raises(ValueError):
        WeightVector([1.0, -0.1])
    with pytest.raises(ValueError):
        WeightVector([1.0, np.inf])
    with pytest.raises(ValueError):
        w.weights[0] = 1.0


def test_toy_summary_sorts():
    assert summarize("toy", [3.2, 9.1, 0.4]).tolist() == [0.4, 3.2, 9.1]
    assert summarize("toy", [3.2, 9.1, 0.4], toy_sorted=False).tolist() == [3.2, 9.1, 0.4]


def test_summary_lengths():
    death = models.simulate_death(0.1, 0.01, ObservationSchedule.linear(20.0, 32), 5)
    s = summarize("death", death)
    assert s.size == 34 and s[-1] == death.aux
    diff = models.simulate_diffusion(0.1, 8, ObservationSchedule.linear(20.0, 8), 5)
    s = summarize("diffusion", diff)
    assert s.size == 72
    # voxel-major: the first nine entries are voxel 1 over time
    assert np.array_equal(s[:9], diff.states[:, 0])
    dim = models.simulate_dimerization([1.0, 0.04, 0.2, 0.5], ObservationSchedule.geometric(100.0, 16),
                                       5, initial=(1000, 0, 0))
    assert summarize("dimerization", dim).size == 51


def test_summary_shape_errors():
    with pytest.raises(ValueError):
        summarize("death", Trajectory(np.zeros((3, 2)), np.arange(3.0), 0.0))
    with pytest.raises(ValueError):
        summarize("dimerization", Trajectory(np.zeros((3, 2)), np.arange(3.0)))
    with pytest.raises(ValueError):
        summarize("nope", Trajectory(np.zeros((3, 2)), np.arange(3.0)))


def test_batch_agrees_with_single():
    sched = ObservationSchedule.linear(20.0, 32)
    counts, z, _ = models.simulate_death_batch([[0.1, 0.01], [0.2, 0.3]], sched, [3, 4])
    batch = summarize_batch("death", counts, z)
    for i in range(2):
        single = summarize("death", Trajectory(counts[i][:, None], sched.times, z[i]))
        assert np.array_equal(batch[i], single)


def test_distance_examples():
    assert weighted_sq_distance([0.5, 0.5], [1, 2], [3, 4]) == 4.0
    assert weighted_sq_distance([1.0, 0.0], [1, 100], [1, -100]) == 0.0
    with pytest.raises(ValueError):
        weighted_sq_distance([1.0], [1, 2], [1, 2])


def test_failed_rows_are_infinitely_far():
    S = np.array([[1.0, 2.0], [np.nan, 0.0], [0.0, 0.0]])
    d = weighted_sq_distances(np.array([0.5, 0.5]), S, np.zeros(2))
    assert d[1] == np.inf and np.isfinite(d[[0, 2]]).all()


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6).flatmap(lambda k: st.tuples(
    arrays(np.float64, k, elements=st.floats(0, 10)),
    arrays(np.float64, k, elements=finite), arrays(np.float64, k, elements=finite))),
    st.floats(1e-3, 1e3))
def test_distance_properties(wab, c):
    w, a, b = wab
    d = weighted_sq_distance(w, a, b)
    assert d >= 0
    assert d == weighted_sq_distance(w, b, a)
    assert weighted_sq_distance(w, a, a) == 0
    assert weighted_sq_distance(c * w, a, b) == pytest.approx(c * d, rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (30, 3), elements=st.integers(-20, 20).map(float)),
       arrays(np.float64, 3, elements=st.floats(0.01, 5)), st.integers(1, 1000))
def test_ranking_invariance(S, w, c):
    # integer-valued residuals and integer scale factors keep products exact
    w = np.round(w * 64) / 64
    d1 = weighted_sq_distances(w, S, np.zeros(3))
    d2 = weighted_sq_distances(c * w, S, np.zeros(3))
    assert np.array_equal(np.argsort(d1, kind="stable"), np.argsort(d2, kind="stable"))
