import math
import pickle
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scobul.config import ExperimentConfig
from scobul.optimize import ExperimentFitness, GaConfig, Gene, SearchSpace, ga_run

SPACE = SearchSpace.from_entries([("a", -1.0, 1.0, "linear"), ("b", 1e-3, 10.0, "log"), ("c", 0.0, 5.0, "linear")])


def sphere(genome):
    x = SPACE.decode(genome)
    return (x["a"] - 0.3) ** 2 + math.log10(x["b"]) ** 2 + (x["c"] - 2) ** 2


class TestSearchSpace:
    def test_linear_and_log_decode(self):
        assert Gene("x", 2, 4).decode(0.5) == 3.0
        assert Gene("x", 1e-4, 1.0, "log").decode(0.5) == pytest.approx(1e-2)
        assert SPACE.decode((0.0, 1.0, 1.0)) == pytest.approx({"a": -1.0, "b": 10.0, "c": 5.0})

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_log_decode_is_monotone_and_bounded(self, u, v):
        g = Gene("x", 1e-5, 0.3, "log")
        lo, hi = sorted((u, v))
        assert 1e-5 * (1 - 1e-12) <= g.decode(lo) <= g.decode(hi) <= 0.3 * (1 + 1e-12)

    @pytest.mark.parametrize("entries", [
        [("x", 1, 1)],
        [("x", 0, 1, "log")],
        [("x", 0, 1, "cubic")],
        [("x", 0, 1), ("x", 0, 2)],
    ])
    def test_validation(self, entries):
        with pytest.raises(ValueError):
            SearchSpace.from_entries(entries)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            SPACE.decode((0.5,))


class TestGaConfig:
    def test_elite_count(self):
        assert GaConfig(population=20, elitism_frac=0.1).n_elite == 2
        assert GaConfig(population=2, elitism_frac=0.5).n_elite == 1

    @pytest.mark.parametrize("kw", [dict(population=1), dict(elitism_frac=0.0), dict(population=5, elitism_frac=0.1),
                                    dict(mutation_prob=1.5), dict(max_generations=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            GaConfig(**kw)


class TestGa:
    def test_history_is_monotone(self):
        res = ga_run(SPACE, GaConfig(population=12, max_generations=15, seed=3), sphere)
        bests = res.best_history
        assert all(b <= a for a, b in zip(bests, bests[1:]))
        assert res.best_fitness == bests[-1] == sphere(res.best_genome)

    @settings(max_examples=10)
    @given(st.integers(0, 10_000))
    def test_elites_survive(self, seed):
        seen = []
        cfg = GaConfig(population=8, elitism_frac=0.25, max_generations=6, seed=seed)
        res = ga_run(SPACE, cfg, sphere, on_generation=seen.append)
        for prev, cur in zip(res.history, res.history[1:]):
            assert cur.best <= prev.best
        assert len(seen) == len(res.history)

    def test_deterministic(self):
        cfg = GaConfig(population=10, max_generations=6, seed=11)
        a, b = ga_run(SPACE, cfg, sphere), ga_run(SPACE, cfg, sphere)
        assert a.history == b.history and a.best_genome == b.best_genome

    def test_seed_changes_search(self):
        a = ga_run(SPACE, GaConfig(population=10, seed=1), sphere)
        b = ga_run(SPACE, GaConfig(population=10, seed=2), sphere)
        assert a.best_genome != b.best_genome

    def test_constant_fitness_stops_after_second_generation(self):
        res = ga_run(SPACE, GaConfig(population=6, elitism_frac=0.2, max_generations=8), lambda g: 0.5)
        assert len(res.history) == 2

    def test_generation_cap(self):
        calls = []

        def f(g):
            calls.append(g)
            return -len(calls)  # always improving
        res = ga_run(SPACE, GaConfig(population=4, max_generations=3, elitism_frac=0.25), f)
        assert len(res.history) == 3

    def test_tiny_population(self):
        res = ga_run(SPACE, GaConfig(population=2, elitism_frac=0.5, max_generations=5), sphere)
        assert 1 <= len(res.history) <= 5

    def test_each_genome_evaluated_once(self):
        calls = []

        def f(g):
            calls.append(g)
            return sphere(g)
        ga_run(SPACE, GaConfig(population=10, max_generations=6, mutation_prob=0.0), f)
        assert len(calls) == len(set(calls))

    def test_penalty_for_degenerate_individuals(self):
        def f(g):
            return math.inf if g[0] > 0.5 else g[1]
        res = ga_run(SPACE, GaConfig(population=10, max_generations=3, seed=4), f)
        h0 = res.history[0]
        assert h0.n_penalized > 0
        assert math.isfinite(h0.worst) and h0.worst >= 1.0 + 1.0 - 1e-12
        assert math.isfinite(res.best_fitness)

    def test_all_degenerate(self):
        res = ga_run(SPACE, GaConfig(population=4, elitism_frac=0.25), lambda g: math.inf)
        assert res.best_fitness == 2.0 and res.history[0].n_penalized == 4

    def test_parallel_map_matches_sequential(self):
        cfg = GaConfig(population=10, max_generations=5, seed=8)
        with ThreadPoolExecutor(4) as pool:
            par = ga_run(SPACE, cfg, sphere, map_fn=pool.map)
        seq = ga_run(SPACE, cfg, sphere)
        assert par.history == seq.history and par.best_genome == seq.best_genome


def tiny_dvs():
    return ExperimentConfig().replace(**{
        "signal.kind": "dvs", "signal.duration": 8000, "dvs.width": 6, "dvs.height": 6,
        "dvs.calibration_steps": 4000, "phases.train_steps": 4000, "phases.rf_steps": 2500,
        "phases.test_steps": 1500, "network.n_neurons": 8, "network.inhibitory_weight": -5,
        "neuron.tau_m": 10, "neuron.threshold": 5,
    })


class TestExperimentFitness:
    space = SearchSpace.from_entries([("neuron.threshold", 1, 1e6, "log"), ("plasticity.d", 1e-4, 0.1, "log")])

    @pytest.fixture(scope="class")
    @staticmethod
    def fitness():
        return ExperimentFitness(tiny_dvs(), TestExperimentFitness.space, "scobul", seeds=2)

    def test_unreachable_threshold_is_degenerate(self, fitness):
        assert fitness((1.0, 0.5)) == math.inf

    def test_reasonable_genome_scores(self, fitness):
        f = fitness((0.1, 0.5))
        assert math.isfinite(f) and f > 0

    def test_zero_plasticity_is_finite(self):
        space = SearchSpace.from_entries([("plasticity.d", 1e-12, 2e-12, "linear")])
        cfg = tiny_dvs().replace(**{"plasticity.D_plus": 0.0, "plasticity.D_minus": 0.0})
        assert math.isfinite(ExperimentFitness(cfg, space, "scobul", seeds=1)((0.0,)))

    def test_configure_sets_arm_and_genes(self, fitness):
        cfg = fitness.configure((0.0, 1.0))
        assert cfg.arm == "scobul" and cfg.neuron.threshold == 1.0
        assert cfg.plasticity.d == pytest.approx(0.1)

    def test_invalid_decoded_config_is_degenerate(self):
        space = SearchSpace.from_entries([("neuron.tau_m", -5, -1)])
        assert ExperimentFitness(tiny_dvs(), space, "scobul")((0.5,)) == math.inf

    def test_pickle_drops_signal(self, fitness):
        fitness.signal  # force generation
        clone = pickle.loads(pickle.dumps(fitness))
        assert clone._signal is None
        assert clone((0.1, 0.5)) == fitness((0.1, 0.5))

    def test_score_rules(self):
        cfg = tiny_dvs()
        assert ExperimentFitness.score({"mean_matched_f1": 0.75}, cfg) == 0.25
        assert ExperimentFitness.score({"normalized_msd": 0.4, "coverage": 0.4}, cfg) == math.inf
        assert ExperimentFitness.score({"normalized_msd": None, "coverage": 0.0}, cfg) == math.inf
        assert ExperimentFitness.score({"normalized_msd": 0.4, "coverage": 0.9}, cfg) == 0.4

    def test_ga_over_experiment(self, fitness):
        res = ga_run(self.space, GaConfig(population=4, elitism_frac=0.25, max_generations=2), fitness)
        assert res.best_fitness < 2.0
        assert np.isfinite([h.best for h in res.history]).all()
