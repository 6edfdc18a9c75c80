"""Familias paramétricas: multinomial, normal de media cero y mezcla de dos normales."""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from riskx.errors import DegenerateEstimateError, InvalidInputError
from riskx.quadrature import integrate

logger = logging.getLogger("riskx.models")

MAX_DERIVATIVE_ORDER = 4
MIXTURE_EPSILON = 1e-8
MIXTURE_TOLERANCE = 1e-10
SINGULAR_TOLERANCE = 1e-12

SeedLike = Union[int, np.random.Generator]


@dataclass(frozen=True)
class ParamPoint:
    """
    Punto del espacio de parámetros.

    `boundary` marca estimadores en la frontera (p. ej. celdas multinomiales
    vacías) y `flat` verosimilitudes planas en las que cualquier valor es óptimo.
    """

    coords: Tuple[float, ...]
    boundary: bool = False
    flat: bool = False

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coords, dtype=float)))
        if not coords:
            raise InvalidInputError("Un punto de parámetros necesita al menos una coordenada")
        if not all(math.isfinite(c) for c in coords):
            raise InvalidInputError(f"Coordenadas no finitas: {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.coords)


def as_generator(seed: SeedLike) -> np.random.Generator:
    """Acepta una semilla entera o un generador ya construido."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def symmetrize(tensor: np.ndarray, order: int) -> np.ndarray:
    """Promedia un tensor (n, q, ..., q) sobre todas las permutaciones de sus últimos `order` ejes."""
    if order < 2:
        return tensor
    lead = tensor.ndim - order
    perms = list(itertools.permutations(range(order)))
    total = np.zeros_like(tensor)
    for perm in perms:
        total += np.transpose(tensor, tuple(range(lead)) + tuple(lead + a for a in perm))
    return total / len(perms)


class ModelFamily(ABC):
    """
    Familia paramétrica con densidad, derivadas del log, muestreador y MLE.

    Las observaciones se pasan en lote: el primer eje indexa observaciones y
    `log_derivs(x, theta, k)` devuelve un array de forma (n,) + (q,) * k con
    las derivadas l_i, l_ij, l_ijk, l_ijkl.
    """

    name = "family"

    @property
    @abstractmethod
    def param_dim(self) -> int:
        """Dimensión q del espacio de parámetros."""

    @abstractmethod
    def domain_check(self, theta: ParamPoint) -> bool:
        """True si theta es interior al espacio de parámetros."""

    @abstractmethod
    def log_density(self, x: np.ndarray, theta: ParamPoint) -> np.ndarray:
        """log f(x; theta) para cada observación."""

    @abstractmethod
    def _log_derivs(self, x: np.ndarray, theta: ParamPoint, order: int) -> np.ndarray:
        pass

    @abstractmethod
    def sample(self, theta: ParamPoint, count: int, seed: SeedLike) -> np.ndarray:
        """Genera `count` observaciones i.i.d."""

    @abstractmethod
    def mle(self, observations: np.ndarray) -> ParamPoint:
        """Estimador de máxima verosimilitud."""

    @abstractmethod
    def fisher(self, theta: ParamPoint) -> np.ndarray:
        """Métrica de Fisher g_ij(theta)."""

    def point(self, coords: Sequence[float]) -> ParamPoint:
        """Construye un ParamPoint validando su dimensión."""
        theta = ParamPoint(tuple(coords))
        self.check_dim(theta)
        return theta

    def check_dim(self, theta: ParamPoint) -> None:
        if theta.dim != self.param_dim:
            raise InvalidInputError(
                f"{self.name}: se esperaban {self.param_dim} coordenadas, hay {theta.dim}"
            )

    def require_interior(self, theta: ParamPoint) -> None:
        self.check_dim(theta)
        if not self.domain_check(theta):
            raise InvalidInputError(f"{self.name}: parámetro fuera del interior: {theta.coords}")

    def log_derivs(self, x: np.ndarray, theta: ParamPoint, order: int) -> np.ndarray:
        """
        Derivadas de orden `order` (1..4) de log f respecto a theta.

        Args:
            x: Lote de observaciones
            theta: Punto interior
            order: Orden de derivación

        Returns:
            Array simétrico de forma (n,) + (q,) * order
        """
        if not 1 <= order <= MAX_DERIVATIVE_ORDER:
            raise InvalidInputError(f"Orden de derivada no soportado: {order}")
        self.require_interior(theta)
        return self._log_derivs(np.asarray(x), theta, order)

    def score(self, x: np.ndarray, theta: ParamPoint) -> np.ndarray:
        return self.log_derivs(x, theta, 1)


# Multinomial


def multinomial_mle(counts: Sequence[int]) -> ParamPoint:
    """
    MLE multinomial: frecuencias relativas de las categorías 1..p.

    Args:
        counts: Conteos de las p+1 categorías (la categoría 0 primero)

    Returns:
        ParamPoint con m̄_1..m̄_p; marcado como frontera si alguna celda está vacía

    Raises:
        InvalidInputError: Si el total es cero o hay conteos negativos
    """
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.size < 2:
        raise InvalidInputError(f"Se necesitan al menos dos categorías: {counts}")
    if np.any(counts < 0):
        raise InvalidInputError(f"Conteos negativos: {counts}")
    total = counts.sum()
    if total <= 0:
        raise InvalidInputError("El total de conteos es cero")
    freqs = counts[1:] / total
    return ParamPoint(tuple(freqs), boundary=bool(np.any(counts == 0)))


@dataclass(frozen=True)
class MultinomialModel(ModelFamily):
    """Multinomial de p+1 categorías con parámetros libres m_1..m_p (m_0 = 1 - Σ m_i)."""

    p: int
    name = "multinomial"

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"La multinomial necesita p >= 1: {self.p}")

    @property
    def param_dim(self) -> int:
        return self.p

    @property
    def category_count(self) -> int:
        return self.p + 1

    def full(self, theta: ParamPoint) -> np.ndarray:
        """Vector completo (m_0, m_1, ..., m_p)."""
        free = theta.vector
        return np.concatenate(([1.0 - free.sum()], free))

    def domain_check(self, theta: ParamPoint) -> bool:
        return theta.dim == self.p and bool(np.all(self.full(theta) > 0))

    def log_density(self, x: np.ndarray, theta: ParamPoint) -> np.ndarray:
        self.check_dim(theta)
        with np.errstate(divide="ignore"):
            return np.log(self.full(theta))[np.asarray(x)]

    def _log_derivs(self, x: np.ndarray, theta: ParamPoint, order: int) -> np.ndarray:
        m = self.full(theta)
        out = np.zeros((x.shape[0],) + (self.p,) * order)
        scale = math.factorial(order - 1)

        rows = np.flatnonzero(x > 0)
        idx = x[rows] - 1
        out[(rows,) + (idx,) * order] = (-1) ** (order - 1) * scale / m[x[rows]] ** order
        # log m_0 depende de todas las coordenadas con derivada -1
        out[x == 0] = -scale / m[0] ** order
        return out

    def sample(self, theta: ParamPoint, count: int, seed: SeedLike) -> np.ndarray:
        self.require_interior(theta)
        return as_generator(seed).choice(self.category_count, size=count, p=self.full(theta))

    def mle(self, observations: np.ndarray) -> ParamPoint:
        counts = np.bincount(np.asarray(observations), minlength=self.category_count)
        return multinomial_mle(counts)

    def fisher(self, theta: ParamPoint) -> np.ndarray:
        m = self.full(theta)
        return 1.0 / m[0] + np.diag(1.0 / m[1:])


@dataclass(frozen=True)
class CategoricalNaturalModel(ModelFamily):
    """
    La misma multinomial en coordenadas naturales θ_i = log(m_i / m_0).

    Las derivadas de orden >= 2 no dependen de la observación: son los
    cumulantes (con signo cambiado) del indicador de categoría.
    """

    p: int
    name = "multinomial-natural"

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"La multinomial necesita p >= 1: {self.p}")

    @property
    def param_dim(self) -> int:
        return self.p

    def natural_point(self, m: Sequence[float]) -> ParamPoint:
        """Convierte las probabilidades libres m_1..m_p en coordenadas naturales."""
        m = np.asarray(m, dtype=float)
        m0 = 1.0 - m.sum()
        if m0 <= 0 or np.any(m <= 0):
            raise InvalidInputError(f"Probabilidades fuera del interior: {m}")
        return ParamPoint(tuple(np.log(m / m0)))

    def full(self, theta: ParamPoint) -> np.ndarray:
        logits = np.concatenate(([0.0], theta.vector))
        weights = np.exp(logits - logits.max())
        return weights / weights.sum()

    def domain_check(self, theta: ParamPoint) -> bool:
        return theta.dim == self.p

    def log_density(self, x: np.ndarray, theta: ParamPoint) -> np.ndarray:
        self.check_dim(theta)
        logits = np.concatenate(([0.0], theta.vector))
        psi = np.logaddexp.reduce(logits)
        return logits[np.asarray(x)] - psi

    def cumulant(self, theta: ParamPoint, order: int) -> np.ndarray:
        """Derivada de orden `order` (2..4) de ψ(θ) = log(1 + Σ exp θ_i)."""
        m = self.full(theta)
        # Indicador centrado para cada categoría (la 0 es el vector nulo)
        centered = np.vstack([np.zeros(self.p), np.eye(self.p)]) - m[1:]
        moment = centered
        for _ in range(order - 1):
            moment = moment[..., None] * centered.reshape((self.p + 1,) + (1,) * (moment.ndim - 1) + (self.p,))
        central = np.tensordot(m, moment, axes=1)
        if order < 4:
            return central
        cov = self.cumulant(theta, 2)
        pairs = (
            np.einsum("ij,kl->ijkl", cov, cov)
            + np.einsum("ik,jl->ijkl", cov, cov)
            + np.einsum("il,jk->ijkl", cov, cov)
        )
        return central - pairs

    def _log_derivs(self, x: np.ndarray, theta: ParamPoint, order: int) -> np.ndarray:
        n = x.shape[0]
        if order == 1:
            indicators = np.zeros((n, self.p + 1))
            indicators[np.arange(n), x] = 1.0
            return indicators[:, 1:] - self.full(theta)[1:]
        kappa = -self.cumulant(theta, order)
        return np.broadcast_to(kappa, (n,) + kappa.shape).copy()

    def sample(self, theta: ParamPoint, count: int, seed: SeedLike) -> np.ndarray:
        self.check_dim(theta)
        return as_generator(seed).choice(self.p + 1, size=count, p=self.full(theta))

    def mle(self, observations: np.ndarray) -> ParamPoint:
        counts = np.bincount(np.asarray(observations), minlength=self.p + 1)
        if np.any(counts == 0):
            raise DegenerateEstimateError(
                f"Celdas vacías: el MLE natural no existe (conteos {counts.tolist()})"
            )
        return ParamPoint(tuple(np.log(counts[1:] / counts[0])))

    def fisher(self, theta: ParamPoint) -> np.ndarray:
        return self.cumulant(theta, 2)


# Normal de media cero


def normal_cov_mle(samples: np.ndarray) -> ParamPoint:
    """
    MLE de la covarianza: Σ̂ = n⁻¹ Σ x_i x_iᵗ en coordenadas triangulares superiores.

    Args:
        samples: Matriz (n, p) de observaciones

    Returns:
        ParamPoint con los σ_ij (i <= j, por filas)

    Raises:
        InvalidInputError: Si hay valores no finitos o la forma es incorrecta
        DegenerateEstimateError: Si n < p o Σ̂ es numéricamente singular
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError(f"Se esperaba una matriz (n, p) de muestras: forma {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("Muestras no finitas")
    n, p = x.shape
    if n < p:
        raise DegenerateEstimateError(f"MLE singular: n={n} < p={p}")

    sigma = x.T @ x / n
    eigenvalues = np.linalg.eigvalsh(sigma)
    if eigenvalues[0] <= SINGULAR_TOLERANCE * max(1.0, eigenvalues[-1]):
        raise DegenerateEstimateError(f"MLE singular: autovalor mínimo {eigenvalues[0]:.3g}")
    rows, cols = np.triu_indices(p)
    return ParamPoint(tuple(sigma[rows, cols]))


@dataclass(frozen=True)
class ZeroMeanNormalModel(ModelFamily):
    """N_p(0, Σ) con coordenadas libres σ_ij, i <= j, ordenadas por filas."""

    p: int
    name = "normal"

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"La normal necesita p >= 1: {self.p}")

    @property
    def param_dim(self) -> int:
        return self.p * (self.p + 1) // 2

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        rows, cols = np.triu_indices(self.p)
        return list(zip(rows.tolist(), cols.tolist()))

    def basis(self) -> np.ndarray:
        """Matrices E_a = ∂Σ/∂σ_a, forma (q, p, p)."""
        basis = np.zeros((self.param_dim, self.p, self.p))
        for a, (i, j) in enumerate(self.pairs):
            basis[a, i, j] = 1.0
            basis[a, j, i] = 1.0
        return basis

    def matrix(self, theta: ParamPoint) -> np.ndarray:
        self.check_dim(theta)
        return np.einsum("a,aij->ij", theta.vector, self.basis())

    def point_from_matrix(self, sigma: np.ndarray) -> ParamPoint:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (self.p, self.p) or not np.allclose(sigma, sigma.T):
            raise InvalidInputError(f"Se esperaba una matriz simétrica {self.p}x{self.p}")
        rows, cols = np.triu_indices(self.p)
        return ParamPoint(tuple(sigma[rows, cols]))

    def domain_check(self, theta: ParamPoint) -> bool:
        if theta.dim != self.param_dim:
            return False
        try:
            np.linalg.cholesky(self.matrix(theta))
        except np.linalg.LinAlgError:
            return False
        return True

    def _as_rows(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.p)
        return x

    def log_density(self, x: np.ndarray, theta: ParamPoint) -> np.ndarray:
        x = self._as_rows(x)
        sigma = self.matrix(theta)
        _, logdet = np.linalg.slogdet(sigma)
        quad = np.einsum("ni,ij,nj->n", x, np.linalg.inv(sigma), x)
        return -0.5 * (self.p * math.log(2 * math.pi) + logdet + quad)

    def _log_derivs(self, x: np.ndarray, theta: ParamPoint, order: int) -> np.ndarray:
        # log f = -½ log|Σ| - ½ xᵗΣ⁻¹x, con Σ lineal en θ
        x = self._as_rows(x)
        basis = self.basis()
        precision = np.linalg.inv(self.matrix(theta))
        u = x @ precision
        k_e = np.einsum("ij,ajk->aik", precision, basis)
        v = np.einsum("aij,nj->nai", basis, u)
        w = np.einsum("ij,naj->nai", precision, v)

        if order == 1:
            traces = np.einsum("aii->a", k_e)
            quads = np.einsum("ni,nai->na", u, v)
        elif order == 2:
            traces = np.einsum("aij,bji->ab", k_e, k_e)
            quads = np.einsum("nai,nbi->nab", v, w)
        elif order == 3:
            traces = np.einsum("aij,bjk,cki->abc", k_e, k_e, k_e)
            quads = np.einsum("nai,bij,ncj->nabc", w, basis, w)
        else:
            traces = np.einsum("aij,bjk,ckl,dli->abcd", k_e, k_e, k_e, k_e)
            middle = np.einsum("bij,jk,ckl->bcil", basis, precision, basis)
            quads = np.einsum("nai,bcil,ndl->nabcd", w, middle, w)

        fact = math.factorial(order - 1)
        trace_part = -0.5 * (-1) ** (order - 1) * fact * traces
        quad_part = -0.5 * (-1) ** order * fact * order * quads
        return symmetrize(trace_part[None, ...] + quad_part, order)

    def sample(self, theta: ParamPoint, count: int, seed: SeedLike) -> np.ndarray:
        self.require_interior(theta)
        chol = np.linalg.cholesky(self.matrix(theta))
        z = as_generator(seed).standard_normal((count, self.p))
        return z @ chol.T

    def mle(self, observations: np.ndarray) -> ParamPoint:
        return normal_cov_mle(self._as_rows(observations))

    def fisher(self, theta: ParamPoint) -> np.ndarray:
        precision = np.linalg.inv(self.matrix(theta))
        k_e = np.einsum("ij,ajk->aik", precision, self.basis())
        return 0.5 * np.einsum("aij,bji->ab", k_e, k_e)


# Mezcla de dos normales


def _mixture_ratio(x: np.ndarray, theta1: float, sigma2: float) -> np.ndarray:
    """l_1 = h / f con h = φ_1 - φ_0, evaluado sin desbordamientos."""
    t = (2.0 * np.asarray(x, dtype=float) - 1.0) / (2.0 * sigma2)
    # φ_1/φ_0 = e^t; se divide por la componente dominante
    s = np.exp(-np.abs(t))
    positive = (1.0 - s) / ((1.0 - theta1) * s + theta1)
    negative = (s - 1.0) / ((1.0 - theta1) + theta1 * s)
    return np.where(t > 0, positive, negative)


def mixture_log_likelihood(samples: np.ndarray, theta1: float, sigma2: float) -> float:
    x = np.asarray(samples, dtype=float)
    log_phi0 = -0.5 * x ** 2 / sigma2
    log_phi1 = -0.5 * (x - 1.0) ** 2 / sigma2
    with np.errstate(divide="ignore"):
        values = np.logaddexp(math.log1p(-theta1) + log_phi0, math.log(theta1) + log_phi1)
    return float(np.sum(values) - x.size * 0.5 * math.log(2 * math.pi * sigma2))


def golden_section_max_search(function, search_interval: Tuple[float, float],
                              tolerance: float) -> float:
    """
    Busca el argumento que maximiza una función unimodal en un intervalo.

    Args:
        function: Función f(x) a maximizar
        search_interval: (inferior, superior)
        tolerance: Se detiene cuando el intervalo mide menos que `tolerance`

    Returns:
        Punto medio del intervalo final
    """
    left, right = search_interval
    invphi = (math.sqrt(5) - 1) / 2
    invphi2 = (3 - math.sqrt(5)) / 2
    width = right - left
    first = left + invphi2 * width
    second = left + invphi * width
    val_first = function(first)
    val_second = function(second)
    n_iter = int(math.ceil(math.log(tolerance / width) / math.log(invphi))) if width > tolerance else 0
    for _ in range(n_iter):
        width *= invphi
        if val_first > val_second:
            right = second
            second, val_second = first, val_first
            first = left + invphi2 * width
            val_first = function(first)
        else:
            left = first
            first, val_first = second, val_second
            second = left + invphi * width
            val_second = function(second)
    return 0.5 * (left + right)


def mixture_mle(samples: np.ndarray, sigma2: float) -> ParamPoint:
    """
    MLE de θ_1 para (1-θ_1)·N(0,σ²) + θ_1·N(1,σ²).

    Búsqueda de sección áurea sobre [ε, 1-ε] seguida de un pulido de Newton
    (la log-verosimilitud es cóncava: ℓ'' = -Σ l_1² <= 0).

    Args:
        samples: Observaciones reales
        sigma2: Varianza conocida

    Returns:
        ParamPoint con θ̂_1; `flat` si la verosimilitud no depende de θ_1,
        `boundary` si el óptimo está en un extremo

    Raises:
        InvalidInputError: Si sigma2 <= 0 o no hay muestras
    """
    if not sigma2 > 0:
        raise InvalidInputError(f"La varianza de la mezcla debe ser positiva: {sigma2}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise InvalidInputError("Se necesita al menos una muestra finita")

    lower, upper = MIXTURE_EPSILON, 1.0 - MIXTURE_EPSILON
    if np.all(_mixture_ratio(x, 0.5, sigma2) == 0.0):
        logger.warning("Verosimilitud plana en θ_1: se devuelve 0.5")
        return ParamPoint((0.5,), flat=True)

    def derivative(theta1: float) -> float:
        return float(np.sum(_mixture_ratio(x, theta1, sigma2)))

    if derivative(lower) <= 0:
        return ParamPoint((lower,), boundary=True)
    if derivative(upper) >= 0:
        return ParamPoint((upper,), boundary=True)

    theta1 = golden_section_max_search(
        lambda t: mixture_log_likelihood(x, t, sigma2), (lower, upper), 1e-6
    )
    for _ in range(50):
        ratios = _mixture_ratio(x, theta1, sigma2)
        curvature = -float(np.sum(ratios ** 2))
        if curvature == 0.0:
            break
        step = float(np.sum(ratios)) / curvature
        theta1 = min(max(theta1 - step, lower), upper)
        if abs(step) < MIXTURE_TOLERANCE:
            break
    logger.debug(f"MLE de la mezcla: θ̂_1 = {theta1:.12f}")
    return ParamPoint((theta1,), boundary=theta1 in (lower, upper))


@dataclass(frozen=True)
class TwoNormalMixtureModel(ModelFamily):
    """(1-θ_1)·N(0,σ²) + θ_1·N(1,σ²) con σ² conocida."""

    sigma2: float
    name = "mixture"

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidInputError(f"La varianza de la mezcla debe ser positiva: {self.sigma2}")

    @property
    def param_dim(self) -> int:
        return 1

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def window(self) -> Tuple[float, float]:
        """Ventana de integración [-10σ-1, 1+10σ+1]."""
        return -10.0 * self.sigma - 1.0, 2.0 + 10.0 * self.sigma

    def domain_check(self, theta: ParamPoint) -> bool:
        return theta.dim == 1 and 0.0 < theta.coords[0] < 1.0

    def log_density(self, x: np.ndarray, theta: ParamPoint) -> np.ndarray:
        self.check_dim(theta)
        theta1 = theta.coords[0]
        x = np.asarray(x, dtype=float)
        norm = -0.5 * math.log(2 * math.pi * self.sigma2)
        with np.errstate(divide="ignore"):
            return norm + np.logaddexp(
                np.log1p(-theta1) - 0.5 * x ** 2 / self.sigma2,
                np.log(theta1) - 0.5 * (x - 1.0) ** 2 / self.sigma2,
            )

    def score_ratio(self, x: np.ndarray, theta1: float) -> np.ndarray:
        return _mixture_ratio(x, theta1, self.sigma2)

    def _log_derivs(self, x: np.ndarray, theta: ParamPoint, order: int) -> np.ndarray:
        # ∂^k log f = (-1)^(k-1) (k-1)! l_1^k
        ratio = self.score_ratio(np.ravel(x), theta.coords[0])
        values = (-1) ** (order - 1) * math.factorial(order - 1) * ratio ** order
        return values.reshape((-1,) + (1,) * order)

    def sample(self, theta: ParamPoint, count: int, seed: SeedLike) -> np.ndarray:
        self.require_interior(theta)
        rng = as_generator(seed)
        component = (rng.random(count) < theta.coords[0]).astype(float)
        return component + self.sigma * rng.standard_normal(count)

    def mle(self, observations: np.ndarray) -> ParamPoint:
        return mixture_mle(observations, self.sigma2)

    def fisher(self, theta: ParamPoint) -> np.ndarray:
        self.require_interior(theta)
        theta1 = theta.coords[0]
        lower, upper = self.window

        def integrand(x: np.ndarray) -> np.ndarray:
            return np.exp(self.log_density(x, theta)) * self.score_ratio(x, theta1) ** 2

        return np.array([[integrate(integrand, lower, upper)]])


def mixture_identity_residual(family: TwoNormalMixtureModel, theta: ParamPoint,
                              x: np.ndarray) -> float:
    """
    Desviación máxima de l_11 = -l_1², l_111 = 2 l_1³, l_1111 = -6 l_1⁴.

    Args:
        family: Familia de mezcla
        theta: Punto interior
        x: Observaciones

    Returns:
        Máximo residuo relativo
    """
    l1 = family.log_derivs(x, theta, 1).ravel()
    residual = 0.0
    for order, factor in ((2, -1.0), (3, 2.0), (4, -6.0)):
        lk = family.log_derivs(x, theta, order).ravel()
        expected = factor * l1 ** order
        scale = np.maximum(np.abs(expected), 1.0)
        residual = max(residual, float(np.max(np.abs(lk - expected) / scale)))
    return residual
