"""Excepciones de riskx."""

from typing import Any, Dict, Optional


class RiskxError(Exception):
    """Error base de riskx."""


class InvalidInputError(RiskxError, ValueError):
    """Parámetros o datos que violan una precondición."""


class PatternTooLargeError(InvalidInputError):
    """Patrón de contracción con demasiados generadores para enumerarlo."""


class ContractViolationError(RiskxError, ValueError):
    """Invariantes que deberían anularse para un corolario y no lo hacen."""


class DegenerateEstimateError(RiskxError, ArithmeticError):
    """Estimador de máxima verosimilitud singular."""


class DivergenceUndefinedError(RiskxError, ArithmeticError):
    """La divergencia no está definida (precisión mezclada no definida positiva)."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NumericalError(RiskxError, ArithmeticError):
    """Fallo numérico: cuadratura sin convergencia, matriz no SPD, derivada no finita."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EstimationImpossibleError(NumericalError):
    """Todas las réplicas produjeron divergencia infinita."""
