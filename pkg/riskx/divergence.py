"""α-divergencias exactas para las familias incorporadas."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import xlogy

from riskx.errors import DivergenceUndefinedError, InvalidInputError
from riskx.models import (
    ModelFamily,
    MultinomialModel,
    ParamPoint,
    TwoNormalMixtureModel,
    ZeroMeanNormalModel,
)
from riskx.quadrature import integrate

logger = logging.getLogger("riskx.divergence")

SIMPLEX_TOLERANCE = 1e-9


def _weights(alpha: float):
    # a = (1-α)/2 para el primer argumento, b = (1+α)/2 para el segundo
    return (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise InvalidInputError(f"α debe ser finito: {alpha}")
    return alpha


def alpha_divergence_multinomial(m_hat, m, alpha: float) -> float:
    """
    D_α[m̂ : m] entre dos distribuciones de p+1 categorías.

    Args:
        m_hat: Vector completo (m̂_0, ..., m̂_p) en el símplex cerrado
        m: Vector completo (m_0, ..., m_p) interior
        alpha: Parámetro α

    Returns:
        Divergencia no negativa, posiblemente +inf (α >= 1 con celdas vacías)

    Raises:
        InvalidInputError: Si m no es interior o m̂ no está en el símplex
    """
    alpha = _check_alpha(alpha)
    m_hat = np.asarray(m_hat, dtype=float)
    m = np.asarray(m, dtype=float)
    if m.shape != m_hat.shape or m.ndim != 1 or m.size < 2:
        raise InvalidInputError(f"Vectores incompatibles: {m_hat.shape} y {m.shape}")
    if np.any(m <= 0) or abs(m.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise InvalidInputError(f"La distribución verdadera debe ser interior: {m}")
    if np.any(m_hat < -SIMPLEX_TOLERANCE) or abs(m_hat.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise InvalidInputError(f"Estimación fuera del símplex: {m_hat}")
    ratio = np.clip(m_hat, 0.0, None) / m

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if alpha == -1.0:
            terms = xlogy(ratio, ratio) - (ratio - 1.0)
            return max(0.0, float(np.sum(m * terms)))
        if alpha == 1.0:
            if np.any(ratio == 0.0):
                return math.inf
            terms = (ratio - 1.0) - np.log(ratio)
            return max(0.0, float(np.sum(m * terms)))

        a, b = _weights(alpha)
        terms = a * (ratio - 1.0) - np.expm1(a * np.log(ratio))
        value = float(np.sum(m * terms)) / (a * b)
    if math.isnan(value):
        return math.inf
    return max(0.0, value)


def alpha_divergence_normal(sigma_hat, sigma, alpha: float) -> float:
    """
    D_α[Σ̂ : Σ] entre N_p(0, Σ̂) y N_p(0, Σ).

    Se calcula con los autovalores generalizados λ de Σ⁻¹Σ̂. Para α = -1 es la
    pérdida de Stein; para α ∉ {±1} usa la integral gaussiana cerrada, definida
    sólo si la precisión mezclada a·Σ̂⁻¹ + b·Σ⁻¹ es definida positiva.

    Raises:
        InvalidInputError: Si alguna matriz no es SPD
        DivergenceUndefinedError: Si la precisión mezclada no es SPD
    """
    alpha = _check_alpha(alpha)
    sigma_hat = np.atleast_2d(np.asarray(sigma_hat, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma_hat.shape != sigma.shape or sigma.shape[0] != sigma.shape[1]:
        raise InvalidInputError(f"Matrices incompatibles: {sigma_hat.shape} y {sigma.shape}")
    for label, matrix in (("Σ̂", sigma_hat), ("Σ", sigma)):
        if not np.allclose(matrix, matrix.T):
            raise InvalidInputError(f"{label} no es simétrica")
        if np.linalg.eigvalsh(matrix)[0] <= 0:
            raise InvalidInputError(f"{label} no es definida positiva")

    lam = linalg.eigh(sigma_hat, sigma, eigvals_only=True)
    excess = lam - 1.0
    if alpha == -1.0:
        return max(0.0, 0.5 * float(np.sum(excess - np.log1p(excess))))
    if alpha == 1.0:
        return max(0.0, 0.5 * float(np.sum(np.log1p(excess) - excess / lam)))

    a, b = _weights(alpha)
    blended = a + b * lam
    if np.any(blended <= 0):
        worst = float(np.min(blended / lam))
        raise DivergenceUndefinedError(
            f"Precisión mezclada no definida positiva (autovalor {worst:.6g}) para α={alpha}",
            eigenvalue=worst,
        )
    # log ∫ f̂^a f^b = -½ Σ [log(a + bλ) - b log λ] <= 0
    gap = np.log1p(b * excess) - b * np.log1p(excess)
    log_integral = -0.5 * float(np.sum(gap))
    return max(0.0, -math.expm1(log_integral) / (a * b))


def alpha_divergence_mixture(theta_hat1: float, theta1: float, sigma2: float,
                             alpha: float) -> float:
    """
    D_α[θ̂_1 : θ_1] para la mezcla (1-θ)·N(0,σ²) + θ·N(1,σ²), por cuadratura.

    El integrando se escribe como f·[a·expm1(t) - expm1(a·t)] con
    t = log(f̂/f), no negativo punto a punto.

    Raises:
        InvalidInputError: Si los parámetros están fuera de rango
        NumericalError: Si la cuadratura no converge
    """
    alpha = _check_alpha(alpha)
    family = TwoNormalMixtureModel(sigma2)
    if not 0.0 <= theta_hat1 <= 1.0:
        raise InvalidInputError(f"θ̂_1 fuera de [0, 1]: {theta_hat1}")
    if not 0.0 < theta1 < 1.0:
        raise InvalidInputError(f"θ_1 debe estar en (0, 1): {theta1}")
    if theta_hat1 == theta1:
        return 0.0

    estimate = ParamPoint((theta_hat1,))
    truth = ParamPoint((theta1,))
    a, b = _weights(alpha)

    def integrand(x: np.ndarray) -> np.ndarray:
        log_truth = family.log_density(x, truth)
        t = family.log_density(x, estimate) - log_truth
        if alpha == -1.0:
            bracket = t * np.exp(t) - np.expm1(t)
        elif alpha == 1.0:
            bracket = np.expm1(t) - t
        else:
            bracket = (a * np.expm1(t) - np.expm1(a * t)) / (a * b)
        return np.exp(log_truth) * bracket

    lower, upper = family.window
    return max(0.0, integrate(integrand, lower, upper))


@dataclass(frozen=True)
class AlphaDivergenceRequest:
    """D_α[theta1 : theta2] dentro de una familia."""

    family: ModelFamily
    theta1: ParamPoint
    theta2: ParamPoint
    alpha: float

    def evaluate(self) -> float:
        return alpha_divergence(self.family, self.theta1, self.theta2, self.alpha)


def alpha_divergence(family: ModelFamily, theta_hat: ParamPoint, theta: ParamPoint,
                     alpha: float) -> float:
    """
    Evalúa D_α[θ̂ : θ] despachando a la forma exacta de cada familia.

    Args:
        family: Familia incorporada
        theta_hat: Primer argumento (típicamente el estimador; puede estar en la frontera)
        theta: Segundo argumento (interior)
        alpha: Parámetro α

    Returns:
        Divergencia no negativa o +inf

    Raises:
        InvalidInputError: Si la familia no está soportada o los puntos no son válidos
    """
    family.check_dim(theta_hat)
    family.require_interior(theta)
    if isinstance(family, MultinomialModel):
        return alpha_divergence_multinomial(family.full(theta_hat), family.full(theta), alpha)
    if isinstance(family, ZeroMeanNormalModel):
        return alpha_divergence_normal(family.matrix(theta_hat), family.matrix(theta), alpha)
    if isinstance(family, TwoNormalMixtureModel):
        return alpha_divergence_mixture(theta_hat.coords[0], theta.coords[0], family.sigma2, alpha)
    raise InvalidInputError(f"Divergencia no disponible para la familia {family.name}")
