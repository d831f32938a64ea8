"""Event-driven simulation of branching particle populations.

Each particle carries an exponential rate-one branching clock and moves
according to the model's motion law between events; at a branching event the
particle is replaced by a litter drawn from the branching law.  Exponential
clocks are memoryless, so lifelines are advanced in vectorized "rounds":
every pending lifeline draws its next branching wait, finishers receive one
exact motion increment to the horizon, branchers receive one to their event.
No time discretization error enters anywhere; Brownian increments and
compound-Poisson jumps are sampled exactly over each segment.

Ensembles derive one independent stream per replica by splitting a
counter-based generator with the replica index, so results do not depend on
scheduling or worker count.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError
from .model import BranchingModel, sample_offspring_batch
from .spectral import minimal_speed

logger = logging.getLogger(__name__)

DEFAULT_MAX_PARTICLES = 5_000_000

#: default pruning window in units of 1/lambda_star; a pruned particle's
#: descendants reach the left tail with probability O(exp(-14)) ~ 8e-7
PRUNE_WINDOW_FACTOR = 14.0


@dataclass(frozen=True)
class Population:
    """Finite particle configuration at a simulation time."""

    positions: np.ndarray
    time: float = 0.0
    pruned_mass_bound: float = 0.0

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", positions)
        if self.time < 0:
            raise DomainError("population time must be nonnegative")
        if positions.size and not np.all(np.isfinite(positions)):
            raise DomainError("positions must be finite")

    @property
    def extinct(self) -> bool:
        return self.positions.size == 0

    @staticmethod
    def single(x: float = 0.0) -> "Population":
        return Population(np.array([x], dtype=float), 0.0)


@dataclass(frozen=True)
class RunConfig:
    """Ensemble run parameters.

    ``prune_window = None`` selects the default window of 14 decay lengths
    (``14 / lambda_star``) whenever a speed profile exists; pass ``math.inf``
    to disable pruning outright.
    """

    t_max: float
    record_times: tuple[float, ...] = ()
    prune_window: float | None = None
    max_particles: int = DEFAULT_MAX_PARTICLES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "record_times", tuple(float(t) for t in self.record_times))
        if any(t < 0 or t > self.t_max for t in self.record_times):
            raise DomainError("record times must lie in [0, t_max]")
        if self.prune_window is not None and self.prune_window <= 0:
            raise DomainError("prune window must be positive")


@dataclass(frozen=True)
class MinimumSample:
    """Left-most particle position of one replica at one time.

    ``m`` is ``inf`` when the replica is extinct at ``t`` (the empty
    configuration satisfies every lower bound).
    """

    t: float
    m: float
    replica: int
    seed: int


@dataclass(frozen=True)
class MartingaleTrace:
    """Additive and derivative martingale values at integer times."""

    replica: int
    n: np.ndarray
    w: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class EnsembleResult:
    minima: list[MinimumSample]
    traces: list[MartingaleTrace]
    invalid_replicas: list[int]
    lambda_star: float | None
    psi_star: float | None


# -- single-population operations ---------------------------------------------


def advance(
    pop: Population,
    t_target: float,
    model: BranchingModel,
    cfg: RunConfig | None,
    rng: np.random.Generator,
) -> Population:
    """Advance a population to ``t_target`` with exact event-driven sampling."""
    if t_target < pop.time:
        raise DomainError("t_target must not precede the population time")
    cap = cfg.max_particles if cfg is not None else DEFAULT_MAX_PARTICLES
    positions, _ = _evolve_segment(pop.positions, None, pop.time, t_target, model, rng, cap)
    return Population(positions, t_target, pop.pruned_mass_bound)


def prune(pop: Population, lambda_star: float, window: float) -> Population:
    """Drop particles further than ``window`` above the current minimum.

    The accumulated ``pruned_mass_bound`` grows by ``count * exp(-lambda_star
    * window)`` per removed particle, the usual change-of-measure bound on a
    removed particle's descendants reaching the left tail.
    """
    if window <= 0:
        raise DomainError("prune window must be positive")
    if pop.extinct:
        return pop
    cutoff = pop.positions.min() + window
    keep = pop.positions <= cutoff
    removed = int(pop.positions.size - np.count_nonzero(keep))
    if removed == 0:
        return pop
    bound = pop.pruned_mass_bound + removed * math.exp(-lambda_star * window)
    return Population(pop.positions[keep], pop.time, bound)


def leftmost(pop: Population) -> float:
    """Minimum position; ``inf`` marks an extinct population."""
    if pop.extinct:
        return math.inf
    return float(pop.positions.min())


def martingales(
    pop: Population, n: int, lambda_star: float, psi_star: float
) -> tuple[float, float]:
    """Additive and derivative martingale values at integer time ``n``."""
    if abs(pop.time - n) > 1e-9:
        raise DomainError("population time must equal the generation index")
    a = lambda_star * pop.positions + n * psi_star
    e = np.exp(-a)
    return float(e.sum()), float((a * e).sum())


# -- ensembles -----------------------------------------------------------------


def run_ensemble(
    model: BranchingModel,
    cfg: RunConfig,
    replicas: int,
    n_workers: int = 1,
) -> EnsembleResult:
    """Simulate independent replicas, recording minima and martingales.

    Minima are recorded at ``cfg.record_times`` and the martingale pair at
    integer times whenever the model admits a minimal-speed profile; the
    right-tail prune runs after every recording checkpoint (window per
    ``RunConfig``).  Replicas whose population exceeds ``cfg.max_particles``
    are reported in ``invalid_replicas`` instead of aborting the ensemble.
    """
    lambda_star = psi_star = None
    try:
        speed = minimal_speed(model)
        lambda_star = speed.lambda_star
        psi_star = speed.c_star * speed.lambda_star
    except Exception as exc:  # verdict-style: ensembles run without a speed profile
        logger.info("no minimal-speed profile (%s); martingales and pruning disabled", exc)
    if model.is_lattice:
        logger.warning(
            "lattice model: minima are recorded but the recentered limit law does not apply"
        )

    minima: list[MinimumSample] = []
    traces: list[MartingaleTrace] = []
    invalid: list[int] = []
    if replicas <= 0:
        return EnsembleResult(minima, traces, invalid, lambda_star, psi_star)

    use_fast = model.is_lattice and model.law.mean() > 1.0 and lambda_star is None
    args = (model, cfg, lambda_star, psi_star, use_fast)
    if n_workers <= 1:
        chunks = [_run_replica_chunk(args, 0, replicas)]
    else:
        bounds = np.linspace(0, replicas, n_workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(_run_replica_chunk, args, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            chunks = [f.result() for f in futures]
    for chunk_minima, chunk_traces, chunk_invalid in chunks:
        minima.extend(chunk_minima)
        traces.extend(chunk_traces)
        invalid.extend(chunk_invalid)
    return EnsembleResult(minima, traces, invalid, lambda_star, psi_star)


def empirical_v(
    model: BranchingModel,
    lam: float,
    t: float,
    replicas: int,
    rng: np.random.Generator | int,
    max_particles: int = DEFAULT_MAX_PARTICLES,
) -> tuple[float, float]:
    """Monte Carlo estimate of ``E sum_y exp(-lam y)`` at time ``t``.

    Returns the sample mean and its standard error.  Replicas are advanced as
    one merged tagged population, which is distribution-identical to
    independent runs and much faster for short horizons.
    """
    rng = _as_generator(rng)
    if replicas <= 0:
        raise DomainError("need at least one replica")
    positions = np.zeros(replicas)
    tags = np.arange(replicas, dtype=np.int64)
    positions, tags = _evolve_segment(positions, tags, 0.0, t, model, rng, max_particles)
    sums = np.bincount(tags, weights=np.exp(-lam * positions), minlength=replicas)
    mean = float(sums.mean())
    se = float(sums.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    return mean, se


def empirical_minima(
    model: BranchingModel,
    t: float,
    replicas: int,
    rng: np.random.Generator | int,
    max_particles: int = DEFAULT_MAX_PARTICLES,
) -> np.ndarray:
    """Left-most positions of merged replicas at time ``t`` (``inf`` = extinct)."""
    rng = _as_generator(rng)
    positions = np.zeros(replicas)
    tags = np.arange(replicas, dtype=np.int64)
    positions, tags = _evolve_segment(positions, tags, 0.0, t, model, rng, max_particles)
    minima = np.full(replicas, np.inf)
    np.minimum.at(minima, tags, positions)
    return minima


# -- engine --------------------------------------------------------------------


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def _replica_rng(seed: int, replica: int) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(seq))


def _displacement_sampler(motion):
    """Motion dispatch hoisted out of the event loop."""
    if motion.kind == "constant":
        return lambda durations, rng: 0.0
    if motion.kind == "brownian":
        return lambda durations, rng: rng.normal(0.0, 1.0, durations.size) * np.sqrt(durations)
    kernel = motion.kernel

    def jump(durations, rng):
        counts = rng.poisson(durations)
        total = int(counts.sum())
        if total == 0:
            return 0.0
        csum = np.concatenate([[0.0], np.cumsum(kernel.sample(rng, total))])
        ends = np.cumsum(counts)
        return csum[ends] - csum[ends - counts]

    return jump


def _evolve_segment(positions, tags, t_start, t_end, model, rng, max_particles):
    """Advance all lifelines from ``t_start`` to ``t_end``; exact in law.

    Returns the positions (and tags, when given) of the population at
    ``t_end``.  Raises ``CapacityError`` when the live count passes
    ``max_particles``.
    """
    if t_end < t_start:
        raise DomainError("segment must not run backwards")
    pos = np.asarray(positions, dtype=float)
    if t_end == t_start or pos.size == 0:
        return pos, tags
    tag = None if tags is None else np.asarray(tags)
    t = np.full(pos.size, float(t_start))
    done_pos: list[np.ndarray] = []
    done_tag: list[np.ndarray] = []
    n_done = 0
    law = model.law
    move = _displacement_sampler(model.motion)
    while pos.size:
        waits = rng.standard_exponential(pos.size)
        t_branch = t + waits
        crosses = t_branch >= t_end
        finished = pos[crosses] + move(t_end - t[crosses], rng)
        done_pos.append(finished)
        if tag is not None:
            done_tag.append(tag[crosses])
        n_done += finished.size
        branching = ~crosses
        parents = pos[branching] + move(waits[branching], rng)
        if parents.size == 0:
            break
        children, litter = sample_offspring_batch(law, parents, rng)
        pos = children
        t = np.repeat(t_branch[branching], litter)
        if tag is not None:
            tag = np.repeat(tag[branching], litter)
        if n_done + pos.size > max_particles:
            raise CapacityError(
                f"population exceeded {max_particles} particles",
                time=float(t.min()) if pos.size else t_end,
                count=n_done + pos.size,
            )
    out_pos = np.concatenate(done_pos) if done_pos else np.empty(0)
    out_tag = np.concatenate(done_tag) if tag is not None and done_tag else None
    return out_pos, (out_tag if tags is not None else None)


def _run_replica_chunk(args, lo: int, hi: int):
    model, cfg, lambda_star, psi_star, use_fast = args
    minima: list[MinimumSample] = []
    traces: list[MartingaleTrace] = []
    invalid: list[int] = []
    record_set = set(cfg.record_times)
    integer_times = (
        [float(n) for n in range(int(math.floor(cfg.t_max + 1e-9)) + 1)]
        if lambda_star is not None
        else []
    )
    checkpoints = sorted(set(cfg.record_times) | set(integer_times) | {float(cfg.t_max)})
    for replica in range(lo, hi):
        rng = _replica_rng(cfg.seed, replica)
        if use_fast:
            minima.extend(_lattice_replica(model, cfg, replica, checkpoints, record_set, rng))
            continue
        try:
            rep_min, rep_trace = _generic_replica(
                model, cfg, replica, checkpoints, record_set, lambda_star, psi_star, rng
            )
        except CapacityError as exc:
            logger.warning("replica %d invalid: %s", replica, exc)
            invalid.append(replica)
            continue
        minima.extend(rep_min)
        if rep_trace is not None:
            traces.append(rep_trace)
    return minima, traces, invalid


def _generic_replica(model, cfg, replica, checkpoints, record_set, lambda_star, psi_star, rng):
    window = cfg.prune_window
    if window is None and lambda_star is not None:
        window = PRUNE_WINDOW_FACTOR / lambda_star
    positions = np.zeros(1)
    time = 0.0
    minima = []
    ns: list[int] = []
    ws: list[float] = []
    ds: list[float] = []
    record_marts = lambda_star is not None

    def note(t_now, pos):
        if t_now in record_set:
            m = float(pos.min()) if pos.size else math.inf
            minima.append(MinimumSample(t_now, m, replica, cfg.seed))
        if record_marts and abs(t_now - round(t_now)) < 1e-9:
            n = int(round(t_now))
            if pos.size:
                a = lambda_star * pos + n * psi_star
                e = np.exp(-a)
                w, d = float(e.sum()), float((a * e).sum())
            else:
                w, d = 0.0, 0.0
            ns.append(n)
            ws.append(w)
            ds.append(d)

    note(0.0, positions)
    for t_next in checkpoints:
        if t_next <= time:
            continue
        positions, _ = _evolve_segment(
            positions, None, time, t_next, model, rng, cfg.max_particles
        )
        time = t_next
        note(time, positions)
        if positions.size == 0:
            for t_later in checkpoints:
                if t_later > time:
                    note(t_later, positions)
            break
        if window is not None and math.isfinite(window):
            cutoff = positions.min() + window
            positions = positions[positions <= cutoff]
    trace = (
        MartingaleTrace(replica, np.array(ns), np.array(ws), np.array(ds))
        if record_marts
        else None
    )
    return minima, trace


def _lattice_replica(model, cfg, replica, checkpoints, record_set, rng):
    """Alive-or-extinct bookkeeping for immobile at-parent models.

    Positions never leave the starting point, so a record reduces to whether
    the replica is alive; the full tree is only explored until enough
    independent supercritical subtrees witness each checkpoint.
    """
    times = [t for t in checkpoints if t in record_set]
    alive = _lattice_alive(model.law, np.array(times), rng, cfg.max_particles)
    return [
        MinimumSample(t, 0.0 if ok else math.inf, replica, cfg.seed)
        for t, ok in zip(times, alive)
    ]


def _lattice_alive(law, cps: np.ndarray, rng, max_particles: int) -> np.ndarray:
    q = law.extinction_probability()
    # q**cap below ~1e-150 cannot influence any recorded statistic
    cap = 1 if q <= 0.0 else min(4096, max(64, int(math.ceil(-350.0 / math.log(q)))))
    alive = np.zeros(cps.size, dtype=bool)
    births = np.zeros(1)
    ns, ps = law.counts_and_probs()
    while births.size and not alive.all():
        waits = rng.standard_exponential(births.size)
        deaths = births + waits
        covered = (births[None, :] <= cps[:, None]) & (deaths[None, :] > cps[:, None])
        alive |= covered.any(axis=1)
        while True:
            open_idx = np.flatnonzero(~alive)
            if open_idx.size == 0:
                return alive
            if np.count_nonzero(births <= cps[open_idx[0]]) >= cap:
                alive[open_idx[0]] = True
            else:
                break
        horizon = cps[open_idx[-1]]
        spawners = deaths[deaths <= horizon]
        if spawners.size == 0:
            break
        litters = rng.choice(ns, size=spawners.size, p=ps)
        births = np.repeat(spawners, litters)
        if births.size > max_particles:
            raise CapacityError(
                f"lattice frontier exceeded {max_particles}", count=int(births.size)
            )
    return alive
