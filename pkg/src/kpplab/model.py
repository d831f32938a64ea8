"""Branching particle models: a single-particle motion plus a branching law.

A model couples a non-branching motion (constant, pure-jump, or standard
Brownian) with a branching law (two children at the parent point, a random
number of children at the parent point, or two children with one displaced).
Branching and jump clocks are exponential with rate one; the closed forms of
the exponential growth transform below assume those unit rates, so they are
fixed rather than configurable.

The central quantity is ``log_laplace``: the logarithm of the expected
exponential sum ``E sum_y exp(-lam * y)`` over the population at time one,
started from a single particle at the origin.  It splits into a motion
exponent and a branching gain, and every catalogue combination has a closed
form built from kernel transforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidKernelError
from .kernels import INF, Kernel

CONSTANT = "constant"
PURE_JUMP = "pure_jump"
BROWNIAN = "brownian"

BINARY_AT_PARENT = "binary_at_parent"
OFFSPRING_AT_PARENT = "offspring_at_parent"
BINARY_ONE_DISPLACED = "binary_one_displaced"


@dataclass(frozen=True, eq=False)
class Motion:
    """Single-particle motion between branching events."""

    kind: str
    kernel: Kernel | None = None
    jump_rate: float = 1.0
    variance_rate: float = 1.0

    def __post_init__(self):
        if self.kind not in (CONSTANT, PURE_JUMP, BROWNIAN):
            raise DomainError(f"unknown motion kind {self.kind!r}")
        if self.kind == PURE_JUMP:
            if self.kernel is None:
                raise DomainError("pure-jump motion needs a jump kernel")
            if self.jump_rate != 1.0:
                raise DomainError("jump rate is fixed to 1")
        if self.kind == BROWNIAN and self.variance_rate != 1.0:
            raise DomainError("Brownian variance rate is fixed to 1")

    @staticmethod
    def constant() -> "Motion":
        return Motion(CONSTANT)

    @staticmethod
    def pure_jump(kernel: Kernel) -> "Motion":
        return Motion(PURE_JUMP, kernel)

    @staticmethod
    def brownian() -> "Motion":
        return Motion(BROWNIAN)

    def exponent(self, lam: float) -> float:
        """Growth exponent of ``E exp(-lam X_t)`` for the free motion."""
        if self.kind == CONSTANT:
            return 0.0
        if self.kind == BROWNIAN:
            return 0.5 * lam * lam
        la = self.kernel.laplace(lam)
        return INF if la == INF else la - 1.0

    def to_dict(self) -> dict:
        d = {"family": self.kind}
        if self.kernel is not None:
            d["kernel"] = self.kernel.to_dict()
        return d


@dataclass(frozen=True, eq=False)
class BranchingLaw:
    """Offspring positions produced when a particle branches.

    ``offspring_probs`` lists ``(n, p_n)`` pairs for the at-parent law; any
    probability deficit is assigned to zero offspring (death).  The displaced
    law puts one child at the parent and one at parent plus a draw from
    ``displacement``.
    """

    kind: str
    offspring_probs: tuple[tuple[int, float], ...] | None = None
    displacement: Kernel | None = None
    branching_rate: float = 1.0

    def __post_init__(self):
        if self.kind not in (BINARY_AT_PARENT, OFFSPRING_AT_PARENT, BINARY_ONE_DISPLACED):
            raise DomainError(f"unknown branching law {self.kind!r}")
        if self.branching_rate != 1.0:
            raise DomainError("branching rate is fixed to 1")
        if self.kind == OFFSPRING_AT_PARENT:
            if not self.offspring_probs:
                raise DomainError("offspring law needs (n, p_n) pairs")
            probs = tuple((int(n), float(p)) for n, p in self.offspring_probs)
            object.__setattr__(self, "offspring_probs", probs)
            total = 0.0
            for n, p in probs:
                if n < 0:
                    raise DomainError("offspring counts must be nonnegative")
                if not 0.0 <= p <= 1.0:
                    raise DomainError("offspring probabilities must lie in [0, 1]")
                total += p
            if total > 1.0 + 1e-12:
                raise DomainError("offspring probabilities must sum to at most 1")
        if self.kind == BINARY_ONE_DISPLACED and self.displacement is None:
            raise DomainError("displaced law needs a displacement kernel")

    @staticmethod
    def binary_at_parent() -> "BranchingLaw":
        return BranchingLaw(BINARY_AT_PARENT)

    @staticmethod
    def offspring_at_parent(probs) -> "BranchingLaw":
        if isinstance(probs, dict):
            probs = sorted(probs.items())
        return BranchingLaw(OFFSPRING_AT_PARENT, offspring_probs=tuple(probs))

    @staticmethod
    def binary_one_displaced(kernel: Kernel) -> "BranchingLaw":
        return BranchingLaw(BINARY_ONE_DISPLACED, displacement=kernel)

    # -- moments -------------------------------------------------------------

    def counts_and_probs(self) -> tuple[np.ndarray, np.ndarray]:
        """Offspring count distribution with the deficit folded into n = 0."""
        given = dict(self.offspring_probs)
        total = sum(given.values())
        if total < 1.0:
            given[0] = given.get(0, 0.0) + (1.0 - total)
        ns = np.array(sorted(given), dtype=np.int64)
        ps = np.array([given[n] for n in sorted(given)], dtype=float)
        return ns, ps / ps.sum()

    def mean(self) -> float:
        if self.kind == OFFSPRING_AT_PARENT:
            return float(sum(n * p for n, p in self.offspring_probs))
        return 2.0

    def factorial_moment(self) -> float:
        """``E N (N - 1)`` of the offspring count."""
        if self.kind == OFFSPRING_AT_PARENT:
            return float(sum(n * (n - 1) * p for n, p in self.offspring_probs))
        return 2.0

    def gain(self, lam: float) -> float:
        """Expected exponential sum over one litter, relative to the parent."""
        if self.kind == BINARY_AT_PARENT:
            return 2.0
        if self.kind == OFFSPRING_AT_PARENT:
            return self.mean()
        lb = self.displacement.laplace(lam)
        return INF if lb == INF else 1.0 + lb

    def generating_function(self, u: np.ndarray) -> np.ndarray:
        """``E u^N`` for at-parent laws (the local reaction term)."""
        u = np.asarray(u, dtype=float)
        if self.kind == BINARY_AT_PARENT:
            return u * u
        if self.kind != OFFSPRING_AT_PARENT:
            raise DomainError("generating function needs an at-parent law")
        ns, ps = self.counts_and_probs()
        out = np.zeros_like(u)
        for n, p in zip(ns, ps):
            out += p * u**int(n)
        return out

    def extinction_probability(self) -> float:
        """Smallest fixed point of the offspring generating function."""
        if self.kind in (BINARY_AT_PARENT, BINARY_ONE_DISPLACED):
            return 0.0
        q = 0.0
        for _ in range(100_000):
            nxt = float(self.generating_function(np.array(q)))
            if abs(nxt - q) < 1e-14:
                return nxt
            q = nxt
        return q

    def to_dict(self) -> dict:
        d = {"family": self.kind}
        if self.offspring_probs is not None:
            d["probs"] = {str(n): p for n, p in self.offspring_probs}
        if self.displacement is not None:
            d["kernel"] = self.displacement.to_dict()
        return d


@dataclass(frozen=True, eq=False)
class BranchingModel:
    """A motion coupled with a branching law."""

    motion: Motion
    law: BranchingLaw
    label: str = ""

    @property
    def is_lattice(self) -> bool:
        # all offspring sit exactly on the parent and the parent never moves
        return self.motion.kind == CONSTANT and self.law.kind in (
            BINARY_AT_PARENT,
            OFFSPRING_AT_PARENT,
        )

    def transform_kernels(self) -> list[Kernel]:
        """Kernels whose exponential moments enter the growth transform."""
        ks = []
        if self.motion.kind == PURE_JUMP:
            ks.append(self.motion.kernel)
        if self.law.kind == BINARY_ONE_DISPLACED:
            ks.append(self.law.displacement)
        return ks

    def to_dict(self) -> dict:
        d = {"motion": self.motion.to_dict(), "law": self.law.to_dict()}
        if self.label:
            d["label"] = self.label
        return d


def offspring_mean(law: BranchingLaw) -> float:
    """Mean number of children per branching event."""
    return law.mean()


def log_laplace(model: BranchingModel, lam: float) -> float:
    """Growth exponent ``psi(lam)`` of the expected exponential sum.

    ``E sum_y exp(-lam y)`` over the time-``t`` population grows like
    ``exp(t psi(lam))``; the value at ``t = 1`` defines the transform of one
    sampling step.  Returns the ``inf`` sentinel past the finiteness edge.
    """
    eta = model.motion.exponent(lam)
    gain = model.law.gain(lam)
    if eta == INF or gain == INF:
        return INF
    return eta + gain - 1.0


def sample_offspring(law: BranchingLaw, parent: float, rng: np.random.Generator) -> np.ndarray:
    """Positions of the children replacing a parent that branches at ``parent``."""
    children, _ = sample_offspring_batch(law, np.array([parent], dtype=float), rng)
    return children


def sample_offspring_batch(
    law: BranchingLaw, parents: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized litter sampling.

    Returns the concatenated child positions and the per-parent litter sizes,
    children grouped by parent in order.
    """
    parents = np.asarray(parents, dtype=float)
    m = parents.size
    if law.kind == BINARY_AT_PARENT:
        return np.repeat(parents, 2), np.full(m, 2, dtype=np.int64)
    if law.kind == BINARY_ONE_DISPLACED:
        disp = law.displacement.sample(rng, m)
        children = np.empty(2 * m, dtype=float)
        children[0::2] = parents
        children[1::2] = parents + disp
        return children, np.full(m, 2, dtype=np.int64)
    ns, ps = law.counts_and_probs()
    counts = rng.choice(ns, size=m, p=ps)
    return np.repeat(parents, counts), counts


def sample_motion(motion: Motion, duration: float, rng: np.random.Generator) -> float:
    """Displacement of the free motion over ``duration``."""
    if duration < 0:
        raise DomainError("duration must be nonnegative")
    return float(sample_displacements(motion, np.array([duration], dtype=float), rng)[0])


def sample_displacements(
    motion: Motion, durations: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Independent displacements over the given durations (exact laws)."""
    durations = np.asarray(durations, dtype=float)
    if np.any(durations < 0):
        raise DomainError("durations must be nonnegative")
    if motion.kind == CONSTANT:
        return np.zeros_like(durations)
    if motion.kind == BROWNIAN:
        return rng.normal(0.0, 1.0, durations.shape) * np.sqrt(durations)
    counts = rng.poisson(durations)
    total = int(counts.sum())
    if total == 0:
        return np.zeros_like(durations)
    jumps = motion.kernel.sample(rng, total)
    csum = np.concatenate([[0.0], np.cumsum(jumps)])
    ends = np.cumsum(counts)
    return csum[ends] - csum[ends - counts]


def model_from_dict(d: dict) -> BranchingModel:
    """Build a model from its JSON description ``{"motion": ..., "law": ...}``."""
    try:
        motion_d = d["motion"]
        law_d = d["law"]
    except (TypeError, KeyError) as exc:
        raise DomainError("model description needs 'motion' and 'law'") from exc
    motion_kind = motion_d.get("family")
    if motion_kind == CONSTANT:
        motion = Motion.constant()
    elif motion_kind == PURE_JUMP:
        motion = Motion.pure_jump(Kernel.from_dict(motion_d["kernel"]))
    elif motion_kind == BROWNIAN:
        motion = Motion.brownian()
    else:
        raise DomainError(f"unknown motion family {motion_kind!r}")
    law_kind = law_d.get("family")
    if law_kind == BINARY_AT_PARENT:
        law = BranchingLaw.binary_at_parent()
    elif law_kind == OFFSPRING_AT_PARENT:
        probs = {int(n): float(p) for n, p in law_d["probs"].items()}
        law = BranchingLaw.offspring_at_parent(probs)
    elif law_kind == BINARY_ONE_DISPLACED:
        law = BranchingLaw.binary_one_displaced(Kernel.from_dict(law_d["kernel"]))
    else:
        raise DomainError(f"unknown branching-law family {law_kind!r}")
    return BranchingModel(motion, law, label=str(d.get("label", "")))


# re-export for convenience: model descriptions often start from kernels
__all__ = [
    "Motion",
    "BranchingLaw",
    "BranchingModel",
    "Kernel",
    "log_laplace",
    "offspring_mean",
    "sample_offspring",
    "sample_offspring_batch",
    "sample_motion",
    "sample_displacements",
    "model_from_dict",
    "InvalidKernelError",
]
