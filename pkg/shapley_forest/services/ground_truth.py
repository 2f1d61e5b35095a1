import dataclasses
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg

from shapley_forest.core.config import settings
from shapley_forest.core.exceptions import GroundTruthError
from shapley_forest.models.ground_truth import DuplicationSpec, Exp2Model, LinearGaussianModel
from shapley_forest.models.subsets import VarSubset
from shapley_forest.schemas.generator import Experiment, GeneratorSpec

logger = logging.getLogger(__name__)

MAX_ENUMERATED = 20


def _noise_for(signal_variance: float, noise_fraction: float) -> float:
    """Noise variance such that noise / (signal + noise) = noise_fraction"""
    return noise_fraction / (1.0 - noise_fraction) * signal_variance


def linear_model_for(spec: GeneratorSpec) -> LinearGaussianModel:
    """Linear-Gaussian model behind exp1a, exp1b and custom specs"""
    params = spec.params
    beta = params.default_beta()
    sigma = params.default_covariance(len(beta))
    if spec.experiment == Experiment.CUSTOM:
        signal = float(beta @ sigma @ beta)
        return LinearGaussianModel(beta, sigma, _noise_for(signal, params.noise_fraction))
    if spec.experiment not in (Experiment.EXP1A, Experiment.EXP1B):
        raise GroundTruthError(f"{spec.experiment.value} is not a linear-Gaussian experiment")
    if params.duplicate_source >= len(beta):
        raise GroundTruthError(f"duplicate source {params.duplicate_source} outside the {len(beta)} base inputs")
    p0 = len(beta)
    signal = float(beta @ sigma @ beta)
    return LinearGaussianModel(
        beta=np.concatenate([beta, np.zeros(params.dummy_count)]),
        sigma=linalg.block_diag(sigma, np.eye(params.dummy_count)),
        noise_var=_noise_for(signal, params.noise_fraction),
        duplication=DuplicationSpec(source=params.duplicate_source, copies=params.duplicate_count, insert_at=p0),
    )


def exp2_model_for(spec: GeneratorSpec) -> Exp2Model:
    params = spec.params
    model = Exp2Model(
        a=params.a,
        b=params.b,
        c=params.c,
        d=params.d,
        alpha=params.alpha,
        beta=params.block_beta,
        rho1=params.rho1,
        rho2=params.rho2,
        dummy_count=params.exp2_dummy_count,
    )
    return dataclasses.replace(model, noise_var=_noise_for(model.signal_variance, params.noise_fraction))


def _conditional_covariance(sigma: np.ndarray, given: np.ndarray, rest: np.ndarray) -> np.ndarray:
    """Cov[X_rest | X_given] via the Schur complement of sigma[given, given]"""
    if not given.size:
        return sigma[np.ix_(rest, rest)]
    try:
        factor = linalg.cho_factor(sigma[np.ix_(given, given)])
    except linalg.LinAlgError:
        raise GroundTruthError("covariance is singular on a conditioning subset", {"subset": (given + 1).tolist()})
    cross = sigma[np.ix_(given, rest)]
    return sigma[np.ix_(rest, rest)] - cross.T @ linalg.cho_solve(factor, cross)


def _null_players(beta: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Inputs with zero coefficient that are independent of every other input"""
    off_diagonal = sigma - np.diag(np.diag(sigma))
    return (beta == 0) & (np.abs(off_diagonal).max(axis=1, initial=0.0) == 0)


def _duplication_weight(P: int, size: int, copies: int) -> float:
    """Total permutation weight of the subsets that reduce to a base subset containing the source"""
    return sum(math.comb(copies, l) / math.comb(P - 1, size + l) for l in range(copies + 1)) + sum(
        math.comb(copies, l) / math.comb(P - 1, size + l - 1) for l in range(1, copies + 1)
    )


def linear_gaussian_shapley(model: LinearGaussianModel) -> np.ndarray:
    """
    Shapley effects of a linear-Gaussian model, normalized by V[Y].

    The marginal contribution of X_j to a subset U is
    Cov[X_j, beta_{-U}^T X_{-U} | X_U]^2 / V[X_j | X_U]. Null players are
    left out of the enumeration; copies of the duplicated source are
    accounted for by reweighting base subsets instead of enlarging sigma.
    """
    null = _null_players(model.beta, model.sigma)
    active = np.flatnonzero(~null)
    if len(active) > MAX_ENUMERATED:
        raise GroundTruthError(f"{len(active)} informative inputs exceed the enumeration limit {MAX_ENUMERATED}")
    dup = model.duplication
    source = None
    copies = 0
    if dup is not None and dup.copies and not null[dup.source]:
        source = int(np.flatnonzero(active == dup.source)[0])
        copies = dup.copies

    beta = model.beta[active]
    sigma = model.sigma[np.ix_(active, active)]
    pa = len(active)
    P = pa + copies
    base_weight = [1.0 / math.comb(P - 1, s) for s in range(pa)]
    dup_weight = [_duplication_weight(P, s, copies) for s in range(pa)] if copies else base_weight

    sums = np.zeros(pa)
    everything = np.arange(pa)
    for mask in range((1 << pa) - 1):
        given = np.array([j for j in range(pa) if mask >> j & 1], dtype=np.intp)
        rest = np.setdiff1d(everything, given)
        conditional = _conditional_covariance(sigma, given, rest)
        variances = np.diag(conditional)
        if (variances <= settings.pd_tolerance).any():
            raise GroundTruthError("conditional variance vanishes; covariance is not positive definite")
        contributions = (conditional @ beta[rest]) ** 2 / variances
        size = len(given)
        weight = dup_weight[size] if source is not None and mask >> source & 1 else base_weight[size]
        sums[rest] += weight * contributions

    effects_active = sums / P / model.output_variance
    base = np.zeros(model.base_p)
    base[active] = effects_active
    if dup is None:
        return base
    copy_value = base[dup.source] if copies else 0.0
    return np.insert(base, dup.insert_at, np.full(dup.copies, copy_value))


def exp2_shapley(model: Exp2Model) -> np.ndarray:
    """Closed-form effects of the two interaction blocks; dummies get exact zeros"""
    denominator = model.output_variance
    effects = np.zeros(model.p)
    if denominator == 0:
        return effects
    for offset, scale, first, second in ((0, model.alpha, model.a, model.b), (5, model.beta, model.c, model.d)):
        factor = scale / denominator
        pair_one = factor * ((first * model.rho1) ** 2 / 8 + 5 * first**2 / 24)
        pair_two = factor * ((second * model.rho2) ** 2 / 8 + 5 * second**2 / 24)
        switch = factor * (
            (first * model.rho1 - second * model.rho2) ** 2 / 4
            + (first * model.rho1) ** 2 / 4
            + (second * model.rho2) ** 2 / 4
            + first**2 / 12
            + second**2 / 12
        )
        effects[offset : offset + 5] = [pair_one, pair_one, switch, pair_two, pair_two]
    return effects


def _linear_v_star(model: LinearGaussianModel, subset: VarSubset) -> float:
    given = np.array(sorted({model.base_index(j) for j in subset.indices}), dtype=np.intp)
    rest = np.setdiff1d(np.arange(model.base_p), given)
    conditional = _conditional_covariance(model.sigma, given, rest)
    unexplained = float(model.beta[rest] @ conditional @ model.beta[rest])
    return (model.signal_variance - unexplained) / model.output_variance


def _pair_product(x: np.ndarray, known: Tuple[bool, bool], i: int, j: int, rho: float) -> np.ndarray:
    if known[0] and known[1]:
        return x[:, i] * x[:, j]
    if known[0]:
        return rho * x[:, i] ** 2
    if known[1]:
        return rho * x[:, j] ** 2
    return np.full(len(x), rho)


def _exp2_conditional_mean(model: Exp2Model, x: np.ndarray, subset: VarSubset) -> np.ndarray:
    """E[Y | X_U] in closed form; the pairs and the switch variable are independent"""
    mean = np.zeros(len(x))
    for offset, scale, first, second in ((0, model.alpha, model.a, model.b), (5, model.beta, model.c, model.d)):
        i1, i2, s, i4, i5 = range(offset, offset + 5)
        if s in subset:
            upper, lower = (x[:, s] > 0).astype(float), (x[:, s] < 0).astype(float)
        else:
            upper = lower = np.full(len(x), 0.5)
        pair_one = _pair_product(x, (i1 in subset, i2 in subset), i1, i2, model.rho1)
        pair_two = _pair_product(x, (i4 in subset, i5 in subset), i4, i5, model.rho2)
        mean += math.sqrt(scale) * (first * pair_one * upper + second * pair_two * lower)
    return mean


def numeric_v_star(
    model: Union[Exp2Model, LinearGaussianModel],
    subset: VarSubset,
    budget: Optional[int] = None,
    seed: int = 0,
) -> Tuple[float, float]:
    """
    V[E[Y | X_U]] / V[Y] and its standard error.

    Exact through conditional covariances for linear-Gaussian models (zero
    error); Monte-Carlo over ``budget`` draws of X with closed-form inner
    conditional means for the interaction model.
    """
    if subset.is_empty:
        return 0.0, 0.0
    if isinstance(model, LinearGaussianModel):
        return _linear_v_star(model, subset), 0.0

    budget = budget or settings.v_star_budget
    if budget < 10_000:
        raise GroundTruthError(f"Monte-Carlo budget must be >= 10000, got {budget}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((budget, model.p)) @ np.linalg.cholesky(model.covariance()).T
    conditional_mean = _exp2_conditional_mean(model, x, subset)
    squared = (conditional_mean - conditional_mean.mean()) ** 2
    value = float(squared.mean()) / model.output_variance
    error = float(squared.std(ddof=1) / math.sqrt(budget)) / model.output_variance
    return value, error


def ground_truth_for(spec: GeneratorSpec) -> Optional[np.ndarray]:
    """Theoretical effects for a generator spec, or None when no closed form exists"""
    if spec.experiment == Experiment.EXP2:
        return exp2_shapley(exp2_model_for(spec))
    if spec.experiment == Experiment.EXP3:
        return None
    effects = linear_gaussian_shapley(linear_model_for(spec))
    if spec.experiment == Experiment.EXP1B:
        effects = np.concatenate([effects, np.zeros(spec.params.extra_noise_count)])
    logger.debug(f"Ground truth for {spec.experiment.value}: sum {effects.sum():.6f}")
    return effects
