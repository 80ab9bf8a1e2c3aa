"""
Expert demonstration datasets

Each record is an initial state with the expert controller's converged
nominal trajectory from it. Splits are regenerated deterministically from
the seed.
"""

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Tuple

import numpy as np

from ..controller import MpcController
from ..exceptions import NoConvergedSamples
from ..types import Trajectory

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator], np.ndarray]

# attempts per requested record before giving up
MAX_ATTEMPTS_FACTOR = 10


class Record(NamedTuple):
    """One demonstration"""
    x_init: np.ndarray
    traj: Trajectory


@dataclass(frozen=True)
class ImitationDataset:
    """Train/val/test demonstration splits"""

    train: Tuple[Record, ...]
    val: Tuple[Record, ...]
    test: Tuple[Record, ...]
    seed: int

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def __repr__(self) -> str:
        return f"ImitationDataset(sizes={self.sizes}, seed={self.seed})"


def gaussian_sampler(n_state: int) -> Sampler:
    """Initial states x ~ N(0, I) (linear-system experiments)"""

    def sample(rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(n_state)

    return sample


def _demonstrations(expert: MpcController, sampler: Sampler, count: int,
                    rng: np.random.Generator) -> Tuple[Record, ...]:
    records = []
    attempts = 0
    while len(records) < count:
        if attempts >= MAX_ATTEMPTS_FACTOR * max(count, 1):
            raise NoConvergedSamples(
                f"expert converged on only {len(records)} of {attempts} sampled initial states"
            )
        attempts += 1
        x_init = sampler(rng)
        _, fp = expert.solve(x_init)
        if not fp.converged:
            logger.warning("expert solve did not converge from x_init=%s; resampling", np.round(x_init, 3))
            continue
        records.append(Record(np.asarray(x_init, dtype=np.float64), fp.traj))
    return tuple(records)


def make_dataset(expert: MpcController, sampler: Sampler, sizes: Sequence[int], seed: int) -> ImitationDataset:
    """
    Sample initial states and record the expert's converged trajectories.

    Args:
        expert: Expert controller (solved from u_init = 0)
        sampler: Draws one initial state from a numpy Generator
        sizes: (train, val, test) record counts
        seed: Generator seed; identical seeds give identical datasets

    Raises:
        NoConvergedSamples: The expert keeps failing to converge

    Example:
        >>> expert = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 20, -2.0, 2.0)
        >>> data = make_dataset(expert, sample_pendulum_state, (10, 5, 5), seed=0)
        >>> data.sizes
        (10, 5, 5)
    """
    n_train, n_val, n_test = (int(s) for s in sizes)
    rng = np.random.default_rng(seed)
    train = _demonstrations(expert, sampler, n_train, rng)
    val = _demonstrations(expert, sampler, n_val, rng)
    test = _demonstrations(expert, sampler, n_test, rng)
    logger.info("dataset generated: train=%d val=%d test=%d (seed %d)", n_train, n_val, n_test, seed)
    return ImitationDataset(train, val, test, seed)


def transitions(records: Sequence[Record]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Stack every (x_t, u_t, x_{t+1}) of the demonstrations.

    Returns:
        (X, U, X_next) with one row per transition
    """
    xs, us, nexts = [], [], []
    for record in records:
        x, u = record.traj
        xs.append(x[:-1])
        us.append(u[:-1])
        nexts.append(x[1:])
    if not xs:
        return np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0))
    return np.concatenate(xs), np.concatenate(us), np.concatenate(nexts)
