import logging
import math
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from shapley_forest.core.config import settings
from shapley_forest.core.exceptions import SolverError
from shapley_forest.models.regression import KernelWeight, RegressionSystem, ShapleyEstimate
from shapley_forest.models.subsets import SubsetDraw, VarSubset

logger = logging.getLogger(__name__)

MAX_EXACT_P = 20


def kernel_weight(p: int, u_size: int) -> float:
    """w(U) = (p-1) / (C(p,|U|) |U| (p-|U|))"""
    if not 1 <= u_size <= p - 1:
        raise SolverError(f"kernel weight is infinite for |U|={u_size} with p={p}")
    return (p - 1) / (math.comb(p, u_size) * u_size * (p - u_size))


def kernel(p: int, u_size: int) -> KernelWeight:
    return KernelWeight(p=p, u_size=u_size, value=kernel_weight(p, u_size))


def assemble(draw: SubsetDraw, values: Sequence[float], constraint: float) -> RegressionSystem:
    """One row per draw entry, duplicates kept, weighted by w(U) / p_hat(U)"""
    values = np.asarray(values, dtype=float)
    if len(values) != len(draw):
        raise SolverError(f"{len(values)} values for {len(draw)} draw entries")
    if not (np.isfinite(values).all() and math.isfinite(constraint)):
        raise SolverError("value estimates and constraint must be finite")
    indicators = np.empty((len(draw), draw.p))
    weights = np.empty(len(draw))
    for row, entry in enumerate(draw.entries):
        if not entry.p_hat > 0:
            raise SolverError(f"row {row} has p_hat = {entry.p_hat}; the sampler must give positive mass")
        indicators[row] = entry.subset.indicator()
        weights[row] = kernel_weight(draw.p, entry.subset.size) / entry.p_hat
    selected = draw.drawn_variables()
    unselected = tuple(j for j in range(draw.p) if j not in selected)
    return RegressionSystem(
        indicators=indicators,
        responses=values,
        weights=weights,
        constraint=float(constraint),
        K=draw.K,
        p=draw.p,
        unselected=unselected,
    )


def _project_capped_simplex(beta: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {0 <= b <= 1, sum b = total} by bisection on the shift"""
    low, high = beta.min() - 1.0, beta.max()
    for _ in range(200):
        shift = (low + high) / 2
        if np.clip(beta - shift, 0.0, 1.0).sum() > total:
            low = shift
        else:
            high = shift
    return np.clip(beta - (low + high) / 2, 0.0, 1.0)


def _solve_box(
    A: np.ndarray,
    b: np.ndarray,
    w: np.ndarray,
    total: float,
    start: np.ndarray,
) -> Dict[str, Any]:
    """
    Weighted least squares on the capped simplex by pairwise coordinate descent.

    Each step moves mass from the coordinate with the largest gradient that
    can still decrease to the one with the smallest gradient that can still
    increase, which keeps the sum fixed.
    """
    H = A.T @ (w[:, None] * A)
    beta = _project_capped_simplex(start, total)
    gradient = H @ beta - A.T @ (w * b)
    tolerance = settings.solver_tolerance * max(1.0, float(np.abs(H).max()))
    max_steps = settings.solver_max_sweeps * len(beta)

    steps = 0
    converged = False
    while steps < max_steps:
        up = np.flatnonzero(beta < 1.0)
        down = np.flatnonzero(beta > 0.0)
        if not up.size or not down.size:
            converged = True
            break
        i = up[np.argmin(gradient[up])]
        j = down[np.argmax(gradient[down])]
        gap = gradient[j] - gradient[i]
        if gap <= tolerance:
            converged = True
            break
        curvature = H[i, i] + H[j, j] - 2 * H[i, j]
        limit = min(1.0 - beta[i], beta[j])
        step = limit if curvature <= 0 else min(gap / curvature, limit)
        beta[i] += step
        beta[j] -= step
        gradient += step * (H[:, i] - H[:, j])
        steps += 1

    if not converged:
        logger.warning(f"Box-constrained solver stopped after {steps} steps without converging")
    # restore the exact sum on the coordinate with the most room
    slack = np.minimum(beta, 1.0 - beta)
    beta[np.argmax(slack)] += total - beta.sum()
    return {"beta": beta, "steps": steps, "converged": converged}


def solve(
    system: RegressionSystem,
    drop_unselected: bool = False,
    strict: Optional[bool] = None,
) -> ShapleyEstimate:
    """
    Minimize sum_i w_i (v_i - beta^T I_i)^2 subject to sum(beta) = c.

    One coordinate (the one with the largest column weight) is eliminated
    through the constraint and the reduced weighted normal equations are
    solved. Components outside [0, 1] are reported, not clipped, unless
    ``strict`` asks for the box-constrained solution.
    """
    strict = settings.solver_strict if strict is None else strict
    p, c = system.p, system.constraint
    if not (np.isfinite(system.responses).all() and math.isfinite(c)):
        raise SolverError("regression responses and constraint must be finite")

    fixed = set(system.unselected) if drop_unselected else set()
    active = np.array([j for j in range(p) if j not in fixed], dtype=np.intp)
    if not active.size:
        raise SolverError("no variable left to solve for after dropping unselected ones")
    A = system.indicators[:, active]
    b, w = system.responses, system.weights

    missing = [int(active[k]) for k in np.flatnonzero(A.sum(axis=0) == 0)]
    if missing or system.rows < len(active):
        raise SolverError(
            "rank deficient system: variables "
            + (", ".join(f"X{j + 1}" for j in missing) or "(none missing)")
            + f" never appear; {system.rows} rows for {len(active)} unknowns",
            {"missing_variables": [j + 1 for j in missing], "rows": system.rows},
        )

    effects = np.zeros(p)
    diagnostics: Dict[str, Any] = {"dropped_variables": [int(j) + 1 for j in sorted(fixed)]}
    column_weight = w @ A
    pivot = int(np.argmax(column_weight))
    others = np.delete(np.arange(len(active)), pivot)
    if others.size:
        Z = A[:, others] - A[:, [pivot]]
        target = b - c * A[:, pivot]
        normal = Z.T @ (w[:, None] * Z)
        rank = np.linalg.matrix_rank(np.sqrt(w)[:, None] * Z)
        if rank < others.size:
            raise SolverError(
                f"rank deficient system: rank {rank} after eliminating the constraint, need {others.size}",
                {"rank": int(rank), "needed": int(others.size)},
            )
        reduced = np.linalg.solve(normal, Z.T @ (w * target))
        beta = np.empty(len(active))
        beta[others] = reduced
        beta[pivot] = c - reduced.sum()
        diagnostics["condition"] = float(np.linalg.cond(normal))
    else:
        beta = np.array([c])
        diagnostics["condition"] = 1.0

    if strict:
        if not 0.0 <= c <= len(active):
            raise SolverError(f"box constraints infeasible for explained variance c={c}", {"constraint": c})
        box = _solve_box(A, b, w, c, beta.copy())
        beta = box["beta"]
        diagnostics.update(strict=True, strict_steps=box["steps"], strict_converged=box["converged"])

    effects[active] = beta
    residuals = b - system.indicators @ effects
    violations = [int(j) + 1 for j in np.flatnonzero((effects < 0) | (effects > 1))]
    diagnostics.update(
        residual_norm=float(np.sqrt(np.sum(w * residuals**2))),
        box_violations=violations,
        pivot=int(active[pivot]) + 1,
    )
    if violations:
        logger.debug(f"Effects outside [0, 1] for variables {violations}")
    return ShapleyEstimate(effects=effects, constraint=c, diagnostics=diagnostics)


def shapley_exact(value_oracle: Callable[[VarSubset], float], p: int) -> np.ndarray:
    """Shapley values of a cooperative game by enumerating all 2^p subsets, with v(empty) = 0"""
    if p > MAX_EXACT_P:
        raise SolverError(f"exact enumeration limited to p <= {MAX_EXACT_P}, got {p}")
    if p < 1:
        raise SolverError(f"game needs at least one player, got p={p}")
    masks = np.arange(1 << p)
    values = np.zeros(1 << p)
    for mask in range(1, 1 << p):
        values[mask] = value_oracle(VarSubset(mask, p))
    sizes = np.array([bin(mask).count("1") for mask in range(1 << p)])
    size_weight = np.array([1.0 / (p * math.comb(p - 1, s)) for s in range(p)])

    effects = np.empty(p)
    for j in range(p):
        without = masks[(masks >> j) & 1 == 0]
        effects[j] = np.sum(size_weight[sizes[without]] * (values[without | 1 << j] - values[without]))
    return effects
