import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scobul.evaluate import (
    CenterReport,
    DegenerateError,
    ReceptiveCenter,
    cluster_recognition_report,
    fit_phase_metric,
    normalized_msd,
    predict_positions,
    receptive_centers,
    truth_windows,
    window_counts,
)
from scobul.events import EventStream
from scobul.siggen import GroundTruthLog


def spikes_from(pairs, n, duration, start=0):
    t, j = zip(*pairs) if pairs else ((), ())
    return EventStream.from_events(t, j, n, duration, start)


class TestMetric:
    def test_scale_is_reciprocal_std(self):
        sign = np.tile([1.0, -1.0], 50)[:, None]
        traj = sign * [2.0, 2.0, 0.1, 0.1]
        assert np.allclose(fit_phase_metric(traj).scale, [0.5, 0.5, 10.0, 10.0])

    def test_scaled_coordinates_have_unit_std(self, rng):
        traj = rng.normal(size=(500, 4)) * [3, 7, 0.02, 0.05] + [5, 5, 0, 0]
        m = fit_phase_metric(traj)
        assert np.allclose(m.apply(traj).std(axis=0), 1.0)

    def test_constant_coordinate_rejected(self):
        traj = np.zeros((10, 4))
        traj[:, 0] = np.arange(10)
        with pytest.raises(DegenerateError, match=r"\[1, 2, 3\]"):
            fit_phase_metric(traj)


class TestCenters:
    def test_spike_triggered_mean(self):
        traj = np.arange(40, dtype=float).reshape(10, 4)
        m = fit_phase_metric(traj)
        sp = spikes_from([(2, 0), (6, 0), (3, 2)], 3, 10)
        rep = receptive_centers(sp, traj, m)
        assert rep.silent == [1]
        c0 = rep.centers[0]
        assert c0.neuron_id == 0 and c0.support == 2
        assert np.allclose(c0.center, m.apply((traj[2] + traj[6]) / 2))

    def test_traj_offset(self):
        traj = np.arange(40, dtype=float).reshape(10, 4)
        m = fit_phase_metric(traj)
        sp = spikes_from([(105, 0)], 1, 10, start=100)
        rep = receptive_centers(sp, traj, m, traj_start=100)
        assert np.allclose(rep.centers[0].center, m.apply(traj[5]))


class TestPrediction:
    def report(self, *centers):
        return CenterReport([ReceptiveCenter(i, np.asarray(c, float), 1) for i, c in centers], [])

    def test_weighted_mean(self):
        cj, ck = np.array([0.0, 0, 0, 0]), np.array([4.0, 8, 0, 4])
        rep = self.report((0, cj), (1, ck))
        sp = spikes_from([(0, 0), (1, 1), (2, 1), (3, 1)], 2, 4)
        ((w, p),) = predict_positions(sp, rep, window=4)
        assert w == 0 and np.allclose(p, (cj + 3 * ck) / 4)

    def test_silent_window_and_unknown_neuron(self):
        rep = self.report((0, [1.0, 1, 1, 1]))
        sp = spikes_from([(0, 0), (5, 1)], 2, 10)
        preds = predict_positions(sp, rep, window=5)
        assert preds[1][1] is None
        assert np.allclose(preds[0][1], 1.0)

    def test_partial_window_dropped(self):
        sp = spikes_from([(9, 0)], 1, 10)
        assert window_counts(sp, 4).shape == (2, 1)

    @settings(max_examples=50)
    @given(st.lists(st.integers(0, 4), min_size=1, max_size=30), st.integers(0, 2**31))
    def test_prediction_in_convex_hull(self, firing, seed):
        rng = np.random.default_rng(seed)
        C = rng.normal(size=(5, 4))
        rep = self.report(*enumerate(C))
        sp = spikes_from([(i % 10, j) for i, j in enumerate(firing)], 5, 10)
        ((_, p),) = predict_positions(sp, rep, window=10)
        used = C[sorted(set(firing))]
        # inside the bounding box of the used centres, and a convex weight exists
        assert np.all(p >= used.min(axis=0) - 1e-12) and np.all(p <= used.max(axis=0) + 1e-12)
        w = np.bincount(firing, minlength=5) / len(firing)
        assert np.allclose(w @ C, p)


class TestMsd:
    def test_centroid_scores_one(self, rng):
        truth = rng.normal(size=(200, 4))
        c = truth.mean(axis=0)
        res = normalized_msd([(w, c) for w in range(200)], truth, c)
        assert res.value == pytest.approx(1.0, abs=1e-12) and res.coverage == 1.0

    def test_perfect_scores_zero(self, rng):
        truth = rng.normal(size=(50, 4))
        assert normalized_msd(list(enumerate(truth)), truth, truth.mean(axis=0)).value == 0.0

    def test_offset(self):
        truth = np.array([[1.0, 0, 0, 0], [-1.0, 0, 0, 0]])
        preds = [(0, truth[0] + [0, 1, 0, 0]), (1, truth[1] + [0, 1, 0, 0])]
        assert normalized_msd(preds, truth, np.zeros(4)).value == pytest.approx(1.0)

    def test_coverage_counts_none(self, rng):
        truth = rng.normal(size=(4, 4))
        preds = [(0, truth[0]), (1, None), (2, truth[2]), (3, None)]
        res = normalized_msd(preds, truth, np.zeros(4))
        assert res.coverage == 0.5 and res.n_windows == 4

    def test_all_silent(self):
        with pytest.raises(DegenerateError):
            normalized_msd([(0, None)], np.zeros((1, 4)), np.zeros(4))

    @given(st.floats(-50, 50), st.integers(0, 2**31))
    def test_translation_invariant(self, shift, seed):
        rng = np.random.default_rng(seed)
        truth = rng.normal(size=(20, 4))
        preds = truth + rng.normal(scale=0.3, size=truth.shape)
        c = truth.mean(axis=0)
        a = normalized_msd(list(enumerate(preds)), truth, c).value
        b = normalized_msd(list(enumerate(preds + shift)), truth + shift, c + shift).value
        assert a == pytest.approx(b, rel=1e-6)

    def test_truth_windows(self):
        s = np.arange(10, dtype=float)[:, None]
        assert truth_windows(s, 4).ravel().tolist() == [1.5, 5.5]


class TestClusterReport:
    truth = GroundTruthLog([np.array([[10, 20], [50, 60]]), np.array([[30, 40]])])

    def test_perfect_detectors(self):
        sp = spikes_from([(12, 0), (55, 0), (35, 2)], 3, 100)
        rep = cluster_recognition_report(sp, self.truth)
        assert rep.mean_matched_f1 == 1.0
        assert rep.matching == [(0, 0, 1.0), (1, 2, 1.0)]
        assert rep.f1[1].tolist() == [0.0, 0.0]

    def test_partial_recall_and_precision(self):
        sp = spikes_from([(12, 0), (80, 0)], 1, 100)
        rep = cluster_recognition_report(sp, self.truth)
        assert rep.precision[0, 0] == 0.5 and rep.recall[0, 0] == 0.5
        assert rep.unmatched_clusters == [1]
        assert rep.mean_matched_f1 == pytest.approx(0.25)

    def test_silent_network(self):
        rep = cluster_recognition_report(spikes_from([], 4, 100), self.truth)
        assert rep.mean_matched_f1 == 0.0 and rep.matching == []

    def test_flags(self):
        sp = spikes_from([(12, 0), (55, 0), (15, 1), (52, 1), (35, 1)], 2, 100)
        rep = cluster_recognition_report(sp, self.truth)
        assert rep.redundant_clusters == [0]

    def test_relabelling_neurons_keeps_score(self, rng):
        t = rng.integers(0, 100, 60)
        j = rng.integers(0, 5, 60)
        perm = rng.permutation(5)
        a = cluster_recognition_report(spikes_from(list(zip(t, j)), 5, 100), self.truth)
        b = cluster_recognition_report(spikes_from(list(zip(t, perm[j])), 5, 100), self.truth)
        assert a.mean_matched_f1 == pytest.approx(b.mean_matched_f1)
        assert np.allclose(a.f1, b.f1[perm])

    def test_test_segment_clipping(self):
        sp = spikes_from([(55, 0)], 1, 50, start=50)
        rep = cluster_recognition_report(sp, self.truth)
        assert rep.recall[0, 0] == 1.0
