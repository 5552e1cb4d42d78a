"""Genetic-algorithm hyperparameter search.

Genomes live in the unit cube; :class:`SearchSpace` maps each gene onto a
named config key, linearly or log-uniformly. The GA is a plain generational
loop: elites are copied unchanged, the rest of the population is bred from
binary-tournament parents by uniform crossover, and with probability
``mutation_prob`` one gene of a child is redrawn. The search stops as soon
as a generation's best fails to beat the previous generation's best, or at
the generation cap.

Fitness is lower-is-better. A fitness function may return ``inf`` for a
degenerate individual; the driver swaps that for a penalty one unit above
the worst finite value observed so far, so histories stay finite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from scobul.config import ConfigError, ExperimentConfig, GaParams, substream
from scobul.experiment import load_signal, make_signal, run_experiment

log = logging.getLogger(__name__)

Genome = tuple  # tuple of floats in [0, 1], one per gene

PENALTY_MARGIN = 1.0
# normalized_msd of the centroid predictor; penalties never undercut it
PENALTY_BASE = 1.0


class Gene(NamedTuple):
    name: str
    low: float
    high: float
    scale: str = "linear"

    def decode(self, u: float) -> float:
        if self.scale == "log":
            return math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        return self.low + u * (self.high - self.low)


@dataclass(frozen=True)
class SearchSpace:
    genes: tuple

    def __post_init__(self):
        names = [g.name for g in self.genes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate gene names in {names}")
        for g in self.genes:
            if not g.low < g.high:
                raise ValueError(f"{g.name}: low must be < high, got [{g.low}, {g.high}]")
            if g.scale not in ("linear", "log"):
                raise ValueError(f"{g.name}: unknown scale {g.scale!r}")
            if g.scale == "log" and g.low <= 0:
                raise ValueError(f"{g.name}: log scale needs a positive range")

    @classmethod
    def from_entries(cls, entries: Iterable) -> "SearchSpace":
        return cls(tuple(Gene(*e) for e in entries))

    def __len__(self):
        return len(self.genes)

    @property
    def names(self) -> list:
        return [g.name for g in self.genes]

    def decode(self, genome: Sequence[float]) -> dict:
        if len(genome) != len(self.genes):
            raise ValueError(f"genome has {len(genome)} genes, space has {len(self.genes)}")
        return {g.name: g.decode(float(u)) for g, u in zip(self.genes, genome)}


@dataclass
class GaConfig:
    population: int = 20
    mutation_prob: float = 0.5
    elitism_frac: float = 0.1
    seeds_per_fitness: int = 2
    max_generations: int = 8
    tournament_size: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 0 < self.elitism_frac < 1:
            raise ValueError("elitism_frac must lie in (0, 1)")
        if self.population * self.elitism_frac < 1 - 1e-9:
            raise ValueError("population * elitism_frac must be >= 1")
        if not 0 <= self.mutation_prob <= 1:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.max_generations < 1 or self.tournament_size < 1 or self.seeds_per_fitness < 1:
            raise ValueError("max_generations, tournament_size and seeds_per_fitness must be >= 1")

    @classmethod
    def from_params(cls, p: GaParams) -> "GaConfig":
        return cls(p.population, p.mutation_prob, p.elitism_frac, p.seeds_per_fitness,
                   p.max_generations, p.tournament_size, p.seed)

    @property
    def n_elite(self) -> int:
        return max(1, int(round(self.population * self.elitism_frac)))


class GenerationStats(NamedTuple):
    generation: int
    best: float
    mean: float
    worst: float
    best_so_far: float
    n_penalized: int


@dataclass
class GaResult:
    best_genome: Genome
    best_fitness: float
    history: list
    evaluations: dict = field(default_factory=dict)  # genome -> raw fitness (inf if degenerate)

    @property
    def best_history(self) -> list:
        return [h.best_so_far for h in self.history]


def _tournament(rng, fitness: np.ndarray, size: int) -> int:
    picks = rng.integers(0, len(fitness), size=size)
    # lowest fitness wins; ties go to the earlier slot
    return int(min(picks, key=lambda i: (fitness[i], i)))


def _breed(rng, pop: list, fit: np.ndarray, cfg: GaConfig) -> list:
    order = np.lexsort((np.arange(len(fit)), fit))
    nxt = [pop[i] for i in order[: cfg.n_elite]]
    n_genes = len(pop[0])
    while len(nxt) < cfg.population:
        a = pop[_tournament(rng, fit, cfg.tournament_size)]
        b = pop[_tournament(rng, fit, cfg.tournament_size)]
        mask = rng.random(n_genes) < 0.5
        child = np.where(mask, a, b)
        if rng.random() < cfg.mutation_prob:
            child[rng.integers(n_genes)] = rng.random()
        nxt.append(tuple(float(x) for x in child))
    return nxt


def ga_run(space: SearchSpace, config: GaConfig, fitness: Callable[[Genome], float],
           map_fn: Callable = map, on_generation: Optional[Callable] = None) -> GaResult:
    """Minimize ``fitness`` over ``space``.

    ``map_fn`` evaluates a list of genomes; any order-preserving map (for
    instance ``ProcessPoolExecutor.map``) gives the same result as the
    builtin. Each distinct genome is evaluated once.
    """
    rng = substream(config.seed, "ga")
    raw: dict = {}
    penalty: dict = {}
    worst_finite = PENALTY_BASE
    pop = [tuple(float(x) for x in row) for row in rng.random((config.population, len(space)))]
    history = []
    best_genome, best_fit = None, math.inf
    prev_best = math.inf
    for gen in range(config.max_generations):
        todo = list(dict.fromkeys(g for g in pop if g not in raw))
        for g, f in zip(todo, map_fn(fitness, todo)):
            raw[g] = float(f)
        vals = np.array([raw[g] for g in pop])
        finite = vals[np.isfinite(vals)]
        if len(finite):
            worst_finite = max(worst_finite, float(finite.max()))
        penalized = ~np.isfinite(vals)
        # fixed on first sight so that an elite keeps its score
        for g in pop:
            if not math.isfinite(raw[g]):
                penalty.setdefault(g, worst_finite + PENALTY_MARGIN)
        fit = np.array([penalty.get(g, raw[g]) for g in pop])
        i = int(np.lexsort((np.arange(len(fit)), fit))[0])
        if fit[i] < best_fit:
            best_genome, best_fit = pop[i], float(fit[i])
        stats = GenerationStats(gen, float(fit[i]), float(fit.mean()), float(fit.max()), best_fit,
                                int(penalized.sum()))
        history.append(stats)
        log.info("generation %d: best %.4f mean %.4f worst %.4f", gen, stats.best, stats.mean, stats.worst)
        if on_generation is not None:
            on_generation(stats)
        if gen > 0 and not fit[i] < prev_best:
            break
        prev_best = float(fit[i])
        if gen + 1 < config.max_generations:
            pop = _breed(rng, pop, fit, config)
    return GaResult(best_genome, best_fit, history, raw)


class ExperimentFitness:
    """Mean score of the experiment pipeline over ``seeds`` weight replicas.

    DVS runs score ``normalized_msd``; cluster runs score ``1 - mean matched
    F1``. Every replica sees the same input signal and differs only in the
    initial resources. A run whose test coverage is below
    ``phases.min_coverage`` (or that cannot be scored) returns ``inf``.

    The input signal is generated (or read from ``signal_dir``) lazily and
    is not pickled, so the object can be shipped to worker processes cheaply.
    """

    def __init__(self, config: ExperimentConfig, space: SearchSpace, arm: str, seeds: int = 2,
                 signal_dir=None):
        self.config = config
        self.space = space
        self.arm = arm
        self.seeds = seeds
        self.signal_dir = signal_dir
        self._signal = None

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_signal"] = None
        return state

    @property
    def signal(self):
        if self._signal is None:
            if self.signal_dir is not None:
                self._signal = load_signal(self.signal_dir, self.config.signal.kind)
            else:
                self._signal = make_signal(self.config)
        return self._signal

    def configure(self, genome: Genome) -> ExperimentConfig:
        return self.config.replace(arm=self.arm, **self.space.decode(genome))

    def __call__(self, genome: Genome) -> float:
        try:
            cfg = self.configure(genome)
        except (ConfigError, ValueError) as exc:
            log.warning("genome %s decodes to an invalid config: %s", genome, exc)
            return math.inf
        scores = []
        for replica in range(self.seeds):
            res = run_experiment(cfg, self.signal, self.arm, replica)
            score = self.score(res, cfg)
            if not math.isfinite(score):
                return math.inf
            scores.append(score)
        return float(np.mean(scores))

    @staticmethod
    def score(result: dict, cfg: ExperimentConfig) -> float:
        if "mean_matched_f1" in result:
            return 1.0 - result["mean_matched_f1"]
        if result["normalized_msd"] is None or result["coverage"] < cfg.phases.min_coverage:
            return math.inf
        return float(result["normalized_msd"])
