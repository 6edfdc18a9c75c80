"""Métrica de Fisher e invariantes geométricos escalares (analíticos o por Monte Carlo)."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from riskx.errors import InvalidInputError, NumericalError
from riskx.models import (
    ModelFamily,
    MultinomialModel,
    ParamPoint,
    ZeroMeanNormalModel,
)
from riskx.streams import GEOMETRY_STREAM, substream

logger = logging.getLogger("riskx.geometry")

DEFAULT_MC_SAMPLES = 100_000
MIN_MC_SAMPLES = 1_000
JACKKNIFE_BLOCKS = 100

L_NAMES = ("l11", "l12", "l13", "l14", "l15", "l21", "l22", "l23", "l24", "l25", "l26")
RAW_NAMES = ("(ij)", "ij", "(ij)k", "ijk", "(ijk)", "(ij)(kl)", "(ijk)l", "(ij)kl", "ijkl")
INVARIANT_NAMES = (
    "f_e", "f_m", "tt", "tdtd", "r_contract",
    "s_ee_cross", "s_ee_trace", "s_em_cross", "s_em_trace",
)


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Métrica g_ij y su inversa g^ij."""

    g: np.ndarray
    g_inv: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[0]


def fisher_from_matrix(g: np.ndarray) -> FisherMatrix:
    """
    Valida una métrica (simétrica, definida positiva) y calcula su inversa.

    Raises:
        NumericalError: Si g no es SPD o la inversa no es fiable
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NumericalError("La métrica de Fisher no es definida positiva", {"g": g.tolist()})
    g_inv = np.linalg.inv(g)
    if not np.allclose(g @ g_inv, np.eye(g.shape[0]), rtol=0.0, atol=1e-8):
        raise NumericalError("Inversa de la métrica de Fisher imprecisa", {"g": g.tolist()})
    return FisherMatrix(g=g, g_inv=0.5 * (g_inv + g_inv.T))


def fisher_matrix(family: ModelFamily, theta: ParamPoint) -> FisherMatrix:
    """
    Métrica de Fisher analítica de la familia en theta.

    Args:
        family: Familia paramétrica
        theta: Punto interior

    Returns:
        FisherMatrix con g y g⁻¹

    Raises:
        InvalidInputError: Si theta no es interior
        NumericalError: Si la métrica no es SPD
    """
    family.require_interior(theta)
    return fisher_from_matrix(family.fisher(theta))


@dataclass(frozen=True, eq=False)
class LMoments:
    """
    Momentos L11..L26 contraídos con g^ij, tensores crudos y réplicas jackknife.

    `replicates` tiene forma (B, 11): cada fila son los once escalares
    calculados sin el bloque b.
    `raw_std_errors` da el error jackknife de cada entrada de los tensores crudos.
    """

    l11: float
    l12: float
    l13: float
    l14: float
    l15: float
    l21: float
    l22: float
    l23: float
    l24: float
    l25: float
    l26: float
    raw: Dict[str, np.ndarray]
    mc_count: int
    std_errors: Dict[str, float]
    replicates: np.ndarray
    raw_std_errors: Dict[str, np.ndarray]

    @property
    def vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in L_NAMES])


@dataclass(frozen=True)
class ScalarInvariants:
    """
    Escalares de la expansión: F_e, F_m, T·T, Td·Td, R y productos S_*.

    `alpha` es el α declarado para F_α = F_e - α'·TdTd. `mc_count` es el número
    real de extracciones cuando los valores vienen de Monte Carlo.
    """

    f_e: float
    f_m: float
    tt: float
    tdtd: float
    r_contract: float
    s_ee_cross: float
    s_ee_trace: float
    s_em_cross: float
    s_em_trace: float
    param_dim: int
    alpha: float = -1.0
    provenance: str = "analytic"
    std_errors: Dict[str, float] = field(default_factory=dict)
    mc_count: Optional[int] = None

    @property
    def alpha_prime(self) -> float:
        return (1.0 - self.alpha) / 2.0

    @property
    def f_alpha(self) -> float:
        return self.f_e - self.alpha_prime * self.tdtd

    def std_error(self, name: str) -> float:
        return self.std_errors.get(name, 0.0)

    def with_alpha(self, alpha: float) -> "ScalarInvariants":
        return replace(self, alpha=float(alpha))

    def as_dict(self) -> Dict[str, float]:
        values = {name: getattr(self, name) for name in INVARIANT_NAMES}
        values["f_alpha"] = self.f_alpha
        return values


def _contract(raw: Dict[str, np.ndarray], g_inv: np.ndarray) -> np.ndarray:
    """Contrae los tensores crudos con g^ij; admite un eje inicial de réplicas."""
    lead = raw["ij"].shape[:-2]
    q = g_inv.shape[-1]
    gi = np.broadcast_to(g_inv, lead + (q, q))
    a, b, c = raw["(ij)kl"], raw["ijkl"], raw["(ij)(kl)"]
    d, e = raw["(ij)k"], raw["ijk"]
    two = "...ij,...kl"
    three = "...ij,...kl,...su"
    values = [
        np.einsum(f"{two},...iljk->...", gi, gi, a),
        np.einsum(f"{two},...ijkl->...", gi, gi, a),
        np.einsum(f"{two},...ijkl->...", gi, gi, b),
        np.einsum(f"{two},...ikjl->...", gi, gi, c),
        np.einsum(f"{two},...ijkl->...", gi, gi, c),
        np.einsum(f"{three},...iks,...jlu->...", gi, gi, gi, d, e),
        np.einsum(f"{three},...ijk,...lsu->...", gi, gi, gi, d, e),
        np.einsum(f"{three},...iks,...jlu->...", gi, gi, gi, e, e),
        np.einsum(f"{three},...ijk,...lsu->...", gi, gi, gi, e, e),
        np.einsum(f"{three},...iks,...jlu->...", gi, gi, gi, d, d),
        np.einsum(f"{three},...ijk,...sul->...", gi, gi, gi, d, d),
    ]
    return np.stack(values, axis=-1)


def _block_means(family: ModelFamily, theta: ParamPoint, block: int, size: int,
                 seed: int) -> Dict[str, np.ndarray]:
    x = family.sample(theta, size, substream(seed, block, GEOMETRY_STREAM))
    l1 = family.log_derivs(x, theta, 1)
    l2 = family.log_derivs(x, theta, 2)
    l3 = family.log_derivs(x, theta, 3)

    finite = np.isfinite(l1).reshape(size, -1).all(1)
    finite &= np.isfinite(l2).reshape(size, -1).all(1)
    finite &= np.isfinite(l3).reshape(size, -1).all(1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise NumericalError(
            "Derivada no finita en una observación de Monte Carlo",
            {"observation": np.asarray(x[bad]).tolist(), "block": block},
        )

    return {
        "(ij)": l2.mean(axis=0),
        "ij": np.einsum("ni,nj->ij", l1, l1) / size,
        "(ij)k": np.einsum("nij,nk->ijk", l2, l1) / size,
        "ijk": np.einsum("ni,nj,nk->ijk", l1, l1, l1) / size,
        "(ijk)": l3.mean(axis=0),
        "(ij)(kl)": np.einsum("nij,nkl->ijkl", l2, l2) / size,
        "(ijk)l": np.einsum("nijk,nl->ijkl", l3, l1) / size,
        "(ij)kl": np.einsum("nij,nk,nl->ijkl", l2, l1, l1) / size,
        "ijkl": np.einsum("ni,nj,nk,nl->ijkl", l1, l1, l1, l1) / size,
    }


def _jackknife_se(replicates: np.ndarray) -> np.ndarray:
    blocks = replicates.shape[0]
    centered = replicates - replicates.mean(axis=0)
    return np.sqrt((blocks - 1) / blocks * np.sum(centered ** 2, axis=0))


def estimate_l_moments(family: ModelFamily, theta: ParamPoint,
                       mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0,
                       workers: int = 1, fisher: Optional[FisherMatrix] = None,
                       analytic_fisher: bool = True,
                       blocks: int = JACKKNIFE_BLOCKS) -> LMoments:
    """
    Estima los momentos L por Monte Carlo con errores estándar jackknife.

    Las extracciones se reparten en `blocks` bloques iguales; el bloque b usa
    el subflujo (seed, b), así que el resultado es idéntico bit a bit para
    cualquier número de workers.

    Args:
        family: Familia paramétrica
        theta: Punto interior
        mc_samples: Número mínimo de extracciones (se redondea a múltiplo de `blocks`)
        seed: Semilla
        workers: Hilos para procesar bloques
        fisher: Métrica a usar en las contracciones; si es None se usa la analítica
        analytic_fisher: Si es False, g se estima como -E[l_ij] en cada réplica
        blocks: Bloques del jackknife

    Returns:
        LMoments

    Raises:
        InvalidInputError: Si theta no es interior o mc_samples < 1000
        NumericalError: Si alguna derivada no es finita
    """
    family.require_interior(theta)
    if mc_samples < MIN_MC_SAMPLES:
        raise InvalidInputError(f"mc_samples debe ser >= {MIN_MC_SAMPLES}: {mc_samples}")
    if blocks < 2:
        raise InvalidInputError(f"Se necesitan al menos 2 bloques: {blocks}")

    size = -(-mc_samples // blocks)
    logger.info(f"Estimando momentos L de {family.name} con {size * blocks} extracciones")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        parts = list(executor.map(
            lambda b: _block_means(family, theta, b, size, seed), range(blocks)
        ))

    stacked = {name: np.stack([part[name] for part in parts]) for name in RAW_NAMES}
    raw = {name: values.mean(axis=0) for name, values in stacked.items()}
    leave_out = {
        name: (values.sum(axis=0)[None, ...] - values) / (blocks - 1)
        for name, values in stacked.items()
    }

    if analytic_fisher:
        metric = fisher if fisher is not None else fisher_matrix(family, theta)
        full_inv = metric.g_inv
        replicate_inv = metric.g_inv
    else:
        full_inv = fisher_from_matrix(-raw["(ij)"]).g_inv
        replicate_inv = np.linalg.inv(-leave_out["(ij)"])

    scalars = _contract(raw, full_inv)
    replicates = _contract(leave_out, replicate_inv)
    errors = _jackknife_se(replicates)
    logger.info(f"Momentos L estimados: L23={scalars[7]:.6g}, L24={scalars[8]:.6g}")

    return LMoments(
        **{name: float(value) for name, value in zip(L_NAMES, scalars)},
        raw=raw,
        mc_count=size * blocks,
        std_errors={name: float(se) for name, se in zip(L_NAMES, errors)},
        replicates=replicates,
        raw_std_errors={name: _jackknife_se(values) for name, values in leave_out.items()},
    )


def _invariant_coefficients(p: int):
    """Combinaciones lineales de (L11..L26) y términos constantes de cada invariante."""
    index = {name: i for i, name in enumerate(L_NAMES)}

    def combo(constant: float = 0.0, **weights: float):
        vector = np.zeros(len(L_NAMES))
        for name, weight in weights.items():
            vector[index[name]] = weight
        return vector, constant

    f_e = dict(l11=2, l12=1, l13=1, l21=-2, l23=-1, l22=-1)
    return {
        "f_e": combo(**f_e),
        "f_m": combo(**f_e, l24=-1),
        "tt": combo(l23=1),
        "tdtd": combo(l24=1),
        "r_contract": combo(l14=1, l15=-1, l11=1, l12=-1, l25=-1, l26=1, l22=1, l21=-1),
        "s_ee_cross": combo(-p, l14=1, l25=-1),
        "s_ee_trace": combo(-p * p, l15=1, l26=-1),
        "s_em_cross": combo(l11=1, l14=1, l25=-1, l21=-1),
        "s_em_trace": combo(l12=1, l15=1, l26=-1, l22=-1),
    }


def invariants_from_l_moments(moments: LMoments, fisher: FisherMatrix,
                              alpha: float = -1.0) -> ScalarInvariants:
    """
    Convierte los momentos L en los invariantes escalares.

    Args:
        moments: Momentos estimados
        fisher: Métrica usada (fija la dimensión p)
        alpha: α declarado para F_α

    Returns:
        ScalarInvariants con errores estándar propagados por jackknife
    """
    p = fisher.dim
    vector = moments.vector
    coefficients = _invariant_coefficients(p)
    values: Dict[str, float] = {}
    errors: Dict[str, float] = {}
    for name, (weights, constant) in coefficients.items():
        values[name] = float(weights @ vector + constant)
        errors[name] = float(_jackknife_se(moments.replicates @ weights))
    f_alpha_weights = coefficients["f_e"][0] - (1.0 - alpha) / 2.0 * coefficients["tdtd"][0]
    errors["f_alpha"] = float(_jackknife_se(moments.replicates @ f_alpha_weights))
    return ScalarInvariants(
        **values, param_dim=p, alpha=float(alpha), provenance="monte-carlo", std_errors=errors,
        mc_count=moments.mc_count,
    )


def estimate_invariants(family: ModelFamily, theta: ParamPoint, alpha: float = -1.0,
                        mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0,
                        workers: int = 1) -> ScalarInvariants:
    """Estima por Monte Carlo los invariantes de `family` en theta."""
    metric = fisher_matrix(family, theta)
    moments = estimate_l_moments(family, theta, mc_samples, seed, workers, fisher=metric)
    return invariants_from_l_moments(moments, metric, alpha)


def _free_probabilities(m) -> np.ndarray:
    if isinstance(m, ParamPoint):
        m = m.coords
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if np.any(m <= 0) or m.sum() >= 1.0:
        raise InvalidInputError(f"Probabilidades fuera del interior: {m.tolist()}")
    return m


def multinomial_total_inverse(m) -> float:
    """M = Σ_{t=0}^p 1/m_t."""
    m = _free_probabilities(m)
    return float(np.sum(1.0 / m) + 1.0 / (1.0 - m.sum()))


def analytic_invariants_multinomial(m, alpha: float = -1.0) -> ScalarInvariants:
    """
    Invariantes exactos de la multinomial (familia exponencial y de mezcla).

    Args:
        m: Probabilidades libres m_1..m_p (o ParamPoint)
        alpha: α declarado

    Returns:
        ScalarInvariants con T·T = M-3p-1, Td·Td = M-(p+1)², F_m = -M+p+1
    """
    m = _free_probabilities(m)
    p = m.size
    total = multinomial_total_inverse(m)
    f_m = -total + p + 1
    tdtd = total - (p + 1) ** 2
    return ScalarInvariants(
        f_e=f_m + tdtd, f_m=f_m, tt=total - 3 * p - 1, tdtd=tdtd, r_contract=0.0,
        s_ee_cross=0.0, s_ee_trace=0.0, s_em_cross=0.0, s_em_trace=0.0,
        param_dim=p, alpha=float(alpha),
    )


def analytic_invariants_normal(p: int, alpha: float = -1.0) -> ScalarInvariants:
    """
    Invariantes exactos de N_p(0, Σ); no dependen de Σ.

    T·T = p³+3p²+4p, Td·Td = 2p(p+1)², F_m = -p(p+1)², F_e = p(p+1)².
    """
    if p < 1:
        raise InvalidInputError(f"p debe ser >= 1: {p}")
    tdtd = 2 * p * (p + 1) ** 2
    f_m = -p * (p + 1) ** 2
    return ScalarInvariants(
        f_e=float(f_m + tdtd), f_m=float(f_m), tt=float(p ** 3 + 3 * p ** 2 + 4 * p),
        tdtd=float(tdtd), r_contract=0.0,
        s_ee_cross=0.0, s_ee_trace=0.0, s_em_cross=0.0, s_em_trace=0.0,
        param_dim=p * (p + 1) // 2, alpha=float(alpha),
    )


def analytic_invariants(family: ModelFamily, theta: ParamPoint,
                        alpha: float = -1.0) -> ScalarInvariants:
    """Invariantes analíticos para las familias con forma cerrada."""
    family.require_interior(theta)
    if isinstance(family, MultinomialModel):
        return analytic_invariants_multinomial(theta.coords, alpha)
    if isinstance(family, ZeroMeanNormalModel):
        return analytic_invariants_normal(family.p, alpha)
    raise InvalidInputError(f"Sin invariantes analíticos para {family.name}: usa Monte Carlo")


def positivity_ok(inv: ScalarInvariants) -> bool:
    """T·T y Td·Td no negativos salvo ruido de 4 s.e."""
    return (inv.tt >= -4.0 * inv.std_error("tt")
            and inv.tdtd >= -4.0 * inv.std_error("tdtd")
            and math.isfinite(inv.f_e))
