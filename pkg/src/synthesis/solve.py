"""
Maximal reachability probabilities by value iteration.

Updates are synchronous (Jacobi): every sweep computes the new vector from
the previous one, so results do not depend on the state order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from src.models.components import Mc
from src.synthesis.product import ProductMdp
from src.synthesis.scc import SccSet, check_partition
from src.synthesis.settings import SolverConfig
from src.utils.logger import get_logger

logger = get_logger()

Targets = Union[np.ndarray, Iterable]


@dataclass(frozen=True)
class ProbVector:
    """Reachability value per state plus convergence bookkeeping"""

    values: np.ndarray
    iterations: int
    converged: bool
    residual: float

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    def at(self, distribution: np.ndarray) -> float:
        """Value of an initial distribution"""
        return float(distribution @ self.values)


def _target_mask(n: int, index: Mapping, targets: Optional[Targets], default: Optional[np.ndarray]) -> np.ndarray:
    if targets is None:
        return default.copy()
    if isinstance(targets, np.ndarray) and targets.dtype == bool:
        return targets.copy()
    mask = np.zeros(n, dtype=bool)
    for t in targets:
        mask[index[t]] = True
    return mask


def _bellman(matrices: Tuple[sparse.csr_matrix, ...], enabled: Tuple[np.ndarray, ...], x: np.ndarray,
             extra: Optional[Tuple[np.ndarray, ...]] = None) -> np.ndarray:
    best = np.full(matrices[0].shape[0], -np.inf)
    for a, (matrix, mask) in enumerate(zip(matrices, enabled)):
        value = matrix @ x
        if extra is not None:
            value = value + extra[a]
        np.maximum(best, np.where(mask, value, -np.inf), out=best)
    # states without enabled actions keep their value
    return np.where(np.isneginf(best), x, best)


def _iterate(matrices, enabled, targets, x, cfg: SolverConfig, extra=None) -> Tuple[np.ndarray, int, bool, float]:
    diff = 0.0
    for iteration in range(1, cfg.max_iterations + 1):
        y = _bellman(matrices, enabled, x, extra)
        # row sums are 1 only to within rounding
        np.clip(y, 0.0, 1.0, out=y)
        y[targets] = 1.0
        diff = float(np.max(np.abs(y - x))) if len(y) else 0.0
        x = y
        if diff < cfg.epsilon:
            return x, iteration, True, diff
    return x, cfg.max_iterations, False, diff


def _system(p: ProductMdp) -> Tuple[Tuple[sparse.csr_matrix, ...], Tuple[np.ndarray, ...]]:
    return tuple(p.transitions[a] for a in p.actions), tuple(p.enabled[a] for a in p.actions)


def value_iteration(p: ProductMdp, targets: Optional[Targets] = None,
                    cfg: Optional[SolverConfig] = None) -> ProbVector:
    """
    Plain value iteration from the target indicator.

    Args:
        p: product MDP
        targets: boolean mask or product states to reach, B_p when omitted
        cfg: termination settings

    Returns:
        ProbVector; `converged` is False when the iteration cap was hit
    """
    cfg = cfg or SolverConfig()
    mask = _target_mask(p.size, p.index if targets is not None else {}, targets, p.accepting)
    matrices, enabled = _system(p)
    x, iterations, converged, diff = _iterate(matrices, enabled, mask, mask.astype(float), cfg)
    if not converged:
        logger.warning(f"Value iteration stopped after {iterations} iterations, last change {diff:.3e}")
    return ProbVector(x, iterations, converged, diff)


def _solve_block(matrices, enabled, targets: np.ndarray, x: np.ndarray, block: np.ndarray,
                 cfg: SolverConfig) -> Tuple[np.ndarray, int, bool, float]:
    """Iterate one block against frozen values outside it"""
    outside = x.copy()
    outside[block] = 0.0
    rows = [m[block] for m in matrices]
    inner = tuple(r[:, block] for r in rows)
    extra = tuple(r @ outside for r in rows)
    return _iterate(inner, tuple(e[block] for e in enabled), targets[block], x[block], cfg, extra)


def block_value_iteration(p: ProductMdp, blocks: SccSet, targets: Optional[Targets] = None,
                          cfg: Optional[SolverConfig] = None, threads: int = 1) -> ProbVector:
    """
    Value iteration block by block in processing order.

    Each block reads only values of blocks it depends on, which are final by
    then. With threads > 1 mutually independent blocks are solved
    concurrently; the result is bit-identical to the sequential run.

    Raises:
        PartitionError: blocks do not partition the product states
    """
    cfg = cfg or SolverConfig()
    check_partition(blocks, p.size)
    mask = _target_mask(p.size, p.index if targets is not None else {}, targets, p.accepting)
    matrices, enabled = _system(p)
    x = mask.astype(float)
    total, converged, residual = 0, True, 0.0
    trace = logger.is_enabled_for(logging.DEBUG)

    def record(b: int, result) -> None:
        nonlocal total, converged, residual
        values, iterations, ok, diff = result
        x[blocks.blocks[b]] = values
        total += iterations
        converged &= ok
        residual = max(residual, diff)
        if trace:
            logger.debug(f"block {b} iters {iterations} residual {diff:.3e}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for level in blocks.levels():
                frozen = x.copy()
                results = pool.map(lambda b: _solve_block(matrices, enabled, mask, frozen, blocks.blocks[b], cfg),
                                   level)
                for b, result in zip(level, results):
                    record(b, result)
    else:
        for b in blocks.order:
            record(b, _solve_block(matrices, enabled, mask, x, blocks.blocks[b], cfg))

    if not converged:
        logger.warning(f"Block value iteration hit the iteration cap in some block, largest last change {residual:.3e}")
    return ProbVector(x, total, converged, residual)


def mc_reachability(m: Mc, targets: Targets, cfg: Optional[SolverConfig] = None) -> ProbVector:
    """Reachability probabilities of a Markov chain (value iteration with one implicit action)"""
    cfg = cfg or SolverConfig()
    mask = _target_mask(m.size, m.index, targets, None)
    x, iterations, converged, diff = _iterate((m.matrix,), (np.ones(m.size, dtype=bool),), mask,
                                              mask.astype(float), cfg)
    if not converged:
        logger.warning(f"Chain reachability stopped after {iterations} iterations, last change {diff:.3e}")
    return ProbVector(x, iterations, converged, diff)


def fixed_point_residual(p: ProductMdp, x: ProbVector, targets: Optional[Targets] = None) -> float:
    """max over non-target s of |x_s - max_a sum_t P(s, a, t) x_t|"""
    mask = _target_mask(p.size, p.index if targets is not None else {}, targets, p.accepting)
    matrices, enabled = _system(p)
    update = _bellman(matrices, enabled, x.values)
    gap = np.abs(update - x.values)[~mask]
    return float(gap.max()) if gap.size else 0.0
