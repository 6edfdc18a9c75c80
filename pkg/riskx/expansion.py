"""Coeficientes n⁻¹ y n⁻² del riesgo del MLE bajo α-divergencia."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from riskx.errors import ContractViolationError, InvalidInputError
from riskx.geometry import ScalarInvariants, multinomial_total_inverse
from riskx.models import (
    ModelFamily,
    MultinomialModel,
    ParamPoint,
    TwoNormalMixtureModel,
    ZeroMeanNormalModel,
)

logger = logging.getLogger("riskx.expansion")

CONTRACT_TOLERANCE = 1e-9

PROVENANCES = (
    "general", "exponential-corollary", "mixture-corollary",
    "multinomial-closed", "normal-closed",
    "kl-reduction", "hellinger-reduction", "chi2-reduction",
)


@dataclass(frozen=True)
class ExpansionResult:
    """ED ≈ c1/n + c2/n² para un α dado."""

    c1: float
    c2: float
    alpha: float
    provenance: str
    param_dim: int

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise InvalidInputError(f"Origen desconocido: {self.provenance}")

    @property
    def alpha_prime(self) -> float:
        return (1.0 - self.alpha) / 2.0

    def value(self, n: float) -> float:
        if n <= 0:
            raise InvalidInputError(f"n debe ser positivo: {n}")
        return self.c1 / n + self.c2 / n ** 2


def _resolve(inv: ScalarInvariants, p: Optional[int], alpha: Optional[float]):
    p = inv.param_dim if p is None else int(p)
    alpha = inv.alpha if alpha is None else float(alpha)
    if p < 1:
        raise InvalidInputError(f"La dimensión del parámetro debe ser >= 1: {p}")
    if not math.isfinite(alpha):
        raise InvalidInputError(f"α debe ser finito: {alpha}")
    return p, alpha


def _bracket(inv: ScalarInvariants, p: int, alpha: float, s_em_cross: float,
             s_em_trace: float, r_contract: float) -> float:
    a1 = (1.0 - alpha) / 2.0
    a2 = a1 * a1
    f_e, tt, tdtd = inv.f_e, inv.tt, inv.tdtd
    d_cross = s_em_cross - inv.s_ee_cross
    d_trace = s_em_trace - inv.s_ee_trace
    terms = [
        a2 * 3 * f_e, a2 * 3 * tt, -a2 * 6 * d_cross, -a2 * 3 * d_trace,
        a2 * 3 * p * p, a2 * 6 * p,
        a1 * 3 * f_e, -a1 * 5 * tt, -a1 * 6 * tdtd, a1 * 6 * d_cross, a1 * 3 * d_trace,
        -a1 * 3 * p * p, -a1 * 6 * p,
        12 * inv.s_ee_cross, -2 * s_em_cross, -s_em_trace,
        tt, 9 * tdtd, 8 * r_contract, -9 * f_e,
    ]
    return math.fsum(terms) / 24.0


def expansion_general(inv: ScalarInvariants, p: Optional[int] = None,
                      alpha: Optional[float] = None) -> ExpansionResult:
    """
    Expansión general del riesgo para cualquier familia regular.

    Args:
        inv: Invariantes (se usa F_e)
        p: Dimensión del parámetro (por defecto inv.param_dim)
        alpha: α de la divergencia (por defecto inv.alpha)

    Returns:
        ExpansionResult con c1 = p/2
    """
    p, alpha = _resolve(inv, p, alpha)
    c2 = _bracket(inv, p, alpha, inv.s_em_cross, inv.s_em_trace, inv.r_contract)
    return ExpansionResult(c1=p / 2.0, c2=c2, alpha=alpha, provenance="general", param_dim=p)


def _require_vanishing(inv: ScalarInvariants, names: Sequence[str], label: str,
                       tolerance: float) -> None:
    for name in names:
        value = getattr(inv, name)
        allowed = max(tolerance, 4.0 * inv.std_error(name))
        if abs(value) > allowed:
            raise ContractViolationError(
                f"{label}: {name} = {value:.6g} no se anula (tolerancia {allowed:.3g})"
            )


def expansion_exponential_family(inv: ScalarInvariants, p: Optional[int] = None,
                                 alpha: Optional[float] = None,
                                 tolerance: float = CONTRACT_TOLERANCE) -> ExpansionResult:
    """
    Expansión para familias exponenciales (S_* = 0, R = 0).

    Raises:
        ContractViolationError: Si algún S_* o R no se anula dentro de
            max(tolerancia, 4·s.e.)
    """
    p, alpha = _resolve(inv, p, alpha)
    _require_vanishing(
        inv, ("s_ee_cross", "s_ee_trace", "s_em_cross", "s_em_trace", "r_contract"),
        "familia exponencial", tolerance,
    )
    a1 = (1.0 - alpha) / 2.0
    a2 = a1 * a1
    f_e, tt, tdtd = inv.f_e, inv.tt, inv.tdtd
    c2 = math.fsum([
        a2 * (3 * f_e + 3 * tt + 3 * p * p + 6 * p),
        a1 * (3 * f_e - 5 * tt - 6 * tdtd - 3 * p * p - 6 * p),
        tt, 9 * tdtd, -9 * f_e,
    ]) / 24.0
    return ExpansionResult(p / 2.0, c2, alpha, "exponential-corollary", p)


def expansion_mixture_family(inv: ScalarInvariants, p: Optional[int] = None,
                             alpha: Optional[float] = None,
                             tolerance: float = CONTRACT_TOLERANCE) -> ExpansionResult:
    """
    Expansión para familias de mezcla: los productos e/m y R se anulan.

    Raises:
        ContractViolationError: Si S_em_* o R no se anulan
    """
    p, alpha = _resolve(inv, p, alpha)
    _require_vanishing(inv, ("s_em_cross", "s_em_trace", "r_contract"),
                       "familia de mezcla", tolerance)
    a1 = (1.0 - alpha) / 2.0
    a2 = a1 * a1
    f_e, tt, tdtd = inv.f_e, inv.tt, inv.tdtd
    cross, trace = inv.s_ee_cross, inv.s_ee_trace
    c2 = math.fsum([
        a2 * (3 * f_e + 3 * tt + 6 * cross + 3 * trace + 3 * p * p + 6 * p),
        a1 * (3 * f_e - 5 * tt - 6 * tdtd - 6 * cross - 3 * trace - 3 * p * p - 6 * p),
        12 * cross, tt, 9 * tdtd, -9 * f_e,
    ]) / 24.0
    return ExpansionResult(p / 2.0, c2, alpha, "mixture-corollary", p)


def expansion_multinomial_closed(m, alpha: float) -> ExpansionResult:
    """
    Forma cerrada multinomial: c2 = {(3+α)(7+3α)(M-1) - 6(α+3)(α+1)p} / 96.

    Args:
        m: Probabilidades libres m_1..m_p (o ParamPoint)
        alpha: α de la divergencia
    """
    if isinstance(m, ParamPoint):
        m = m.coords
    total = multinomial_total_inverse(m)
    p = int(np.atleast_1d(np.asarray(m)).size)
    alpha = float(alpha)
    c2 = ((3 + alpha) * (7 + 3 * alpha) * (total - 1)
          - 6 * (alpha + 3) * (alpha + 1) * p) / 96.0
    return ExpansionResult(p / 2.0, c2, alpha, "multinomial-closed", p)


def expansion_normal_closed(p: int, alpha: float) -> ExpansionResult:
    """
    Forma cerrada para N_p(0, Σ); no depende de Σ.

    Con q = p(p+1)/2 parámetros libres:
    24·c2 = α'²(6p³+15p²+15p+3q²+6q) - α'(14p³+33p²+29p+3q²+6q) + 10p³+21p²+13p.
    """
    if p < 1:
        raise InvalidInputError(f"p debe ser >= 1: {p}")
    alpha = float(alpha)
    q = p * (p + 1) // 2
    a1 = (1.0 - alpha) / 2.0
    quad = 6 * p ** 3 + 15 * p ** 2 + 15 * p + 3 * q ** 2 + 6 * q
    lin = 14 * p ** 3 + 33 * p ** 2 + 29 * p + 3 * q ** 2 + 6 * q
    const = 10 * p ** 3 + 21 * p ** 2 + 13 * p
    c2 = math.fsum([a1 * a1 * quad, -a1 * lin, const]) / 24.0
    return ExpansionResult(q / 2.0, c2, alpha, "normal-closed", q)


def special_alpha_reductions(inv: ScalarInvariants,
                             p: Optional[int] = None) -> Dict[float, ExpansionResult]:
    """
    Formas reducidas para KL (α=-1), Hellinger (α=0) y χ² (α=-3).

    Returns:
        Diccionario α -> ExpansionResult
    """
    p, _ = _resolve(inv, p, None)
    f, tt, td, r = inv.f_e, inv.tt, inv.tdtd, inv.r_contract
    ec, et = inv.s_ee_cross, inv.s_ee_trace
    mc, mt = inv.s_em_cross, inv.s_em_trace

    kl = math.fsum([-3 * f, -tt, 3 * td, 12 * ec, -2 * mc, -mt, 8 * r])
    hellinger = math.fsum([
        -27 / 4 * f, -3 / 4 * tt, 6 * td, 21 / 2 * ec, -3 / 4 * et,
        -1 / 2 * mc, -1 / 4 * mt, 8 * r, -3 / 4 * p * p, -3 / 2 * p,
    ])
    chi2 = math.fsum([
        9 * f, 3 * tt, -3 * td, 24 * ec, 6 * et, -14 * mc, -7 * mt, 8 * r,
        6 * p * p, 12 * p,
    ])
    return {
        -1.0: ExpansionResult(p / 2.0, kl / 24.0, -1.0, "kl-reduction", p),
        0.0: ExpansionResult(p / 2.0, hellinger / 24.0, 0.0, "hellinger-reduction", p),
        -3.0: ExpansionResult(p / 2.0, chi2 / 24.0, -3.0, "chi2-reduction", p),
    }


def expansion_for_family(family: ModelFamily, theta: ParamPoint, alpha: float,
                         invariants: Optional[ScalarInvariants] = None) -> ExpansionResult:
    """
    Elige la forma adecuada: cerrada (multinomial, normal), corolario de
    mezcla o fórmula general con los invariantes dados.

    Raises:
        InvalidInputError: Si la familia necesita invariantes y no se pasan
    """
    family.require_interior(theta)
    if isinstance(family, MultinomialModel):
        return expansion_multinomial_closed(theta.coords, alpha)
    if isinstance(family, ZeroMeanNormalModel):
        return expansion_normal_closed(family.p, alpha)
    if invariants is None:
        raise InvalidInputError(f"{family.name}: se necesitan invariantes estimados")
    if isinstance(family, TwoNormalMixtureModel):
        return expansion_mixture_family(invariants, family.param_dim, alpha)
    return expansion_general(invariants, family.param_dim, alpha)
