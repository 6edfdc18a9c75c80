"""Riesgo empírico E_θ[D_α(θ̂ : θ)] por réplicas de Monte Carlo y oráculos exactos."""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb, digamma
from scipy.stats import multinomial

from riskx.divergence import alpha_divergence, alpha_divergence_multinomial
from riskx.errors import (
    DegenerateEstimateError,
    DivergenceUndefinedError,
    EstimationImpossibleError,
    InvalidInputError,
)
from riskx.expansion import ExpansionResult
from riskx.geometry import fisher_matrix
from riskx.models import ModelFamily, ParamPoint, ZeroMeanNormalModel
from riskx.streams import CHECK_STREAM, SIMULATION_STREAM, substream

logger = logging.getLogger("riskx.simulation")

POLICIES = ("count-and-exclude", "propagate")
MIN_REPS = 100
CHUNK_SIZE = 5_000
MAX_ENUMERATION = 2_000_000


@dataclass(frozen=True)
class SimulationPlan:
    """Plan de simulación: familia, θ verdadero, α, n, réplicas, semilla y política de infinitos."""

    family: ModelFamily
    theta: ParamPoint
    alpha: float
    n: int
    reps: int
    seed: int = 0
    policy: str = "count-and-exclude"
    workers: int = 1

    def __post_init__(self):
        if self.reps < MIN_REPS:
            raise InvalidInputError(f"reps debe ser >= {MIN_REPS}: {self.reps}")
        if self.n < 1:
            raise InvalidInputError(f"n debe ser >= 1: {self.n}")
        if self.seed < 0:
            raise InvalidInputError(f"La semilla debe ser >= 0: {self.seed}")
        if self.policy not in POLICIES:
            raise InvalidInputError(f"Política desconocida: {self.policy} (opciones: {POLICIES})")
        if not math.isfinite(self.alpha):
            raise InvalidInputError(f"α debe ser finito: {self.alpha}")
        self.family.require_interior(self.theta)


@dataclass(frozen=True)
class RiskEstimate:
    """Media empírica de la divergencia con su error estándar."""

    mean: float
    std_error: float
    reps_used: int
    infinite_count: int
    expansion_value: Optional[float] = None

    @property
    def z_score(self) -> Optional[float]:
        if self.expansion_value is None or not self.std_error > 0 or math.isinf(self.mean):
            return None
        return (self.mean - self.expansion_value) / self.std_error


def replicate_divergence(plan: SimulationPlan, replicate: int) -> float:
    """
    Divergencia de una réplica, reproducible de forma aislada.

    Los MLE singulares y las divergencias indefinidas cuentan como +inf.
    """
    rng = substream(plan.seed, replicate, SIMULATION_STREAM)
    sample = plan.family.sample(plan.theta, plan.n, rng)
    try:
        estimate = plan.family.mle(sample)
        return alpha_divergence(plan.family, estimate, plan.theta, plan.alpha)
    except (DegenerateEstimateError, DivergenceUndefinedError) as e:
        logger.debug(f"Réplica {replicate}: divergencia infinita ({e})")
        return math.inf


def _simulate_chunk(plan: SimulationPlan, start: int, stop: int) -> np.ndarray:
    return np.array([replicate_divergence(plan, r) for r in range(start, stop)])


def simulate_divergences(plan: SimulationPlan) -> np.ndarray:
    """Divergencias de todas las réplicas, en orden de réplica."""
    bounds = list(range(0, plan.reps, CHUNK_SIZE)) + [plan.reps]
    starts, stops = bounds[:-1], bounds[1:]
    if plan.workers <= 1 or len(starts) == 1:
        chunks = [_simulate_chunk(plan, a, b) for a, b in zip(starts, stops)]
    else:
        with ProcessPoolExecutor(max_workers=plan.workers) as executor:
            chunks = list(executor.map(_simulate_chunk, [plan] * len(starts), starts, stops))
    return np.concatenate(chunks)


def simulate_risk(plan: SimulationPlan,
                  expansion: Optional[ExpansionResult] = None) -> RiskEstimate:
    """
    Estima E_θ[D_α(θ̂ : θ)] con `plan.reps` réplicas de tamaño n.

    La réplica r usa el subflujo (seed, r): el resultado es idéntico bit a bit
    para cualquier número de workers.

    Args:
        plan: Plan de simulación
        expansion: Expansión con la que comparar (opcional)

    Returns:
        RiskEstimate

    Raises:
        EstimationImpossibleError: Si todas las réplicas son infinitas
    """
    logger.info(
        f"Simulando {plan.reps} réplicas de {plan.family.name} (n={plan.n}, α={plan.alpha})"
    )
    values = simulate_divergences(plan)
    finite = np.isfinite(values)
    infinite_count = int(values.size - finite.sum())
    if infinite_count == values.size:
        raise EstimationImpossibleError(
            f"Las {values.size} réplicas produjeron divergencia infinita",
            {"n": plan.n, "alpha": plan.alpha, "theta": plan.theta.coords},
        )
    if infinite_count:
        logger.warning(f"{infinite_count} réplicas con divergencia infinita ({plan.policy})")

    comparison = expansion.value(plan.n) if expansion is not None else None
    if plan.policy == "propagate" and infinite_count:
        return RiskEstimate(math.inf, math.inf, values.size, infinite_count, comparison)

    kept = values[finite]
    mean = float(np.mean(kept))
    std_error = float(np.std(kept, ddof=1) / math.sqrt(kept.size)) if kept.size > 1 else math.inf
    reps_used = int(kept.size) if plan.policy == "count-and-exclude" else int(values.size)
    logger.info(f"Riesgo empírico: {mean:.6g} ± {std_error:.2g}")
    return RiskEstimate(mean, std_error, reps_used, infinite_count, comparison)


@dataclass(frozen=True)
class InvarianceReport:
    estimate_a: RiskEstimate
    estimate_b: RiskEstimate
    difference: float
    tolerance: float
    passed: bool


def invariance_check_normal(p: int, sigma_a, sigma_b, alpha: float, n: int, reps: int,
                            seed: int = 0, workers: int = 1) -> InvarianceReport:
    """
    Compara el riesgo simulado en dos covarianzas: debe coincidir para toda Σ.

    Returns:
        InvarianceReport con |media_a - media_b| frente a 3·√(se_a² + se_b²)
    """
    family = ZeroMeanNormalModel(p)
    estimates = []
    for sigma in (sigma_a, sigma_b):
        theta = family.point_from_matrix(np.atleast_2d(np.asarray(sigma, dtype=float)))
        plan = SimulationPlan(family, theta, alpha, n, reps, seed, workers=workers)
        estimates.append(simulate_risk(plan))
    first, second = estimates
    difference = abs(first.mean - second.mean)
    tolerance = 3.0 * math.hypot(first.std_error, second.std_error)
    return InvarianceReport(first, second, difference, tolerance, difference < tolerance)


@dataclass(frozen=True, eq=False)
class MomentCheckReport:
    empirical: np.ndarray
    expected: np.ndarray
    std_errors: np.ndarray
    allowance: np.ndarray
    reps_used: int
    passed: bool


def mle_moment_check(family: ModelFamily, theta: ParamPoint, n: int, reps: int,
                     seed: int = 0, bias_budget: float = 10.0) -> MomentCheckReport:
    """
    Compara n·cov(θ̂) con g⁻¹ entrada a entrada.

    La tolerancia es max(5·s.e., |g⁻¹|·c/n) con c = `bias_budget`.

    Raises:
        EstimationImpossibleError: Si menos de dos réplicas dan un MLE no singular
    """
    family.require_interior(theta)
    if reps < MIN_REPS:
        raise InvalidInputError(f"reps debe ser >= {MIN_REPS}: {reps}")
    expected = fisher_matrix(family, theta).g_inv

    estimates = []
    for r in range(reps):
        sample = family.sample(theta, n, substream(seed, r, CHECK_STREAM))
        try:
            estimates.append(family.mle(sample).vector)
        except DegenerateEstimateError:
            continue
    used = len(estimates)
    if used < 2:
        raise EstimationImpossibleError(
            f"Sólo {used} de {reps} réplicas dieron un MLE no singular",
            {"n": n, "reps": reps, "theta": theta.coords},
        )
    values = np.array(estimates)
    deviations = values - values.mean(axis=0)
    products = np.einsum("ri,rj->rij", deviations, deviations)
    empirical = n * products.sum(axis=0) / (used - 1)
    std_errors = n * products.std(axis=0, ddof=1) / math.sqrt(used)
    allowance = np.maximum(5.0 * std_errors, np.abs(expected) * bias_budget / n)
    passed = bool(np.all(np.abs(empirical - expected) <= allowance))
    return MomentCheckReport(empirical, expected, std_errors, allowance, used, passed)


@dataclass(frozen=True)
class ExactRisk:
    """Riesgo exacto, probabilidad de divergencia infinita y riesgo condicionado a finitud."""

    value: float
    infinite_probability: float
    conditional_value: float


def _count_vectors(n: int, categories: int):
    # barras y estrellas: cada combinación de separadores da un vector de conteos
    for bars in itertools.combinations(range(n + categories - 1), categories - 1):
        edges = (-1,) + bars + (n + categories - 1,)
        yield [edges[i + 1] - edges[i] - 1 for i in range(categories)]


def exact_risk_multinomial(m: Sequence[float], n: int, alpha: float) -> ExactRisk:
    """
    E_m[D_α(m̂ : m)] exacto enumerando todos los vectores de conteos.

    Args:
        m: Probabilidades libres m_1..m_p
        n: Tamaño muestral
        alpha: α de la divergencia

    Raises:
        InvalidInputError: Si la enumeración supera 2·10⁶ vectores
    """
    free = np.atleast_1d(np.asarray(m, dtype=float))
    full = np.concatenate(([1.0 - free.sum()], free))
    if np.any(full <= 0):
        raise InvalidInputError(f"Probabilidades fuera del interior: {free.tolist()}")
    if n < 1:
        raise InvalidInputError(f"n debe ser >= 1: {n}")
    size = comb(n + full.size - 1, full.size - 1, exact=True)
    if size > MAX_ENUMERATION:
        raise InvalidInputError(f"Enumeración demasiado grande: {size} vectores de conteos")

    counts = np.array(list(_count_vectors(n, full.size)))
    probabilities = multinomial.pmf(counts, n, full)
    divergences = np.array([
        alpha_divergence_multinomial(c / n, full, alpha) for c in counts
    ])
    finite = np.isfinite(divergences)
    infinite_probability = float(probabilities[~finite].sum())
    finite_mass = float(probabilities[finite].sum())
    conditional = float(np.dot(probabilities[finite], divergences[finite]) / finite_mass)
    value = math.inf if infinite_probability > 0 else conditional
    return ExactRisk(value, infinite_probability, conditional)


def exact_kl_risk_normal(p: int, n: int) -> float:
    """
    Pérdida de Stein esperada: ½{p·log(n/2) - Σ_{i=1}^p ψ((n-i+1)/2)}.

    No depende de Σ.
    """
    if p < 1 or n < p:
        raise InvalidInputError(f"Se necesita 1 <= p <= n: p={p}, n={n}")
    shapes = (n - np.arange(1, p + 1) + 1) / 2.0
    return 0.5 * float(p * math.log(n / 2.0) - np.sum(digamma(shapes)))
