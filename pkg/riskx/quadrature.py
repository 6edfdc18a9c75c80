"""Cuadratura compuesta de Gauss-Legendre con refinamiento por duplicación de paneles."""

import logging
from typing import Callable

import numpy as np

from riskx.errors import NumericalError

logger = logging.getLogger("riskx.quadrature")

GAUSS_ORDER = 20
INITIAL_PANELS = 16
MAX_REFINEMENTS = 12
RELATIVE_TOLERANCE = 1e-10
ABSOLUTE_TOLERANCE = 1e-20

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)


def _composite(integrand: Callable[[np.ndarray], np.ndarray],
               lower: float, upper: float, panels: int) -> float:
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    points = mid[:, None] + half[:, None] * _NODES[None, :]
    values = integrand(points.ravel()).reshape(points.shape)
    return float(np.sum(half * (values @ _WEIGHTS)))


def integrate(integrand: Callable[[np.ndarray], np.ndarray], lower: float, upper: float,
              rtol: float = RELATIVE_TOLERANCE, atol: float = ABSOLUTE_TOLERANCE,
              max_refinements: int = MAX_REFINEMENTS) -> float:
    """
    Integra una función vectorizada sobre [lower, upper].

    Duplica el número de paneles hasta que dos estimaciones sucesivas difieran
    menos de `rtol` relativo (o `atol` absoluto).

    Args:
        integrand: Función que recibe un array de abscisas y devuelve valores
        lower: Extremo inferior
        upper: Extremo superior
        rtol: Tolerancia relativa entre refinamientos
        atol: Tolerancia absoluta
        max_refinements: Número máximo de duplicaciones

    Returns:
        Valor de la integral

    Raises:
        NumericalError: Si no converge o el integrando no es finito
    """
    if not upper > lower:
        raise ValueError(f"Intervalo de integración vacío: [{lower}, {upper}]")

    panels = INITIAL_PANELS
    previous = _composite(integrand, lower, upper, panels)
    history = [previous]
    for _ in range(max_refinements):
        panels *= 2
        current = _composite(integrand, lower, upper, panels)
        history.append(current)
        if not np.isfinite(current):
            raise NumericalError(
                "Integrando no finito en la cuadratura",
                {"interval": (lower, upper), "panels": panels, "history": history},
            )
        if abs(current - previous) <= rtol * abs(current) + atol:
            logger.debug(f"Cuadratura convergida con {panels} paneles: {current:.16g}")
            return current
        previous = current

    raise NumericalError(
        f"La cuadratura no convergió tras {max_refinements} refinamientos",
        {"interval": (lower, upper), "panels": panels, "history": history},
    )
