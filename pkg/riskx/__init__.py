"""
riskx: expansión de segundo orden del riesgo del MLE bajo α-divergencia.

Incluye formas cerradas (multinomial, normal de media cero), estimación por
Monte Carlo de los invariantes geométricos, un simulador de riesgo empírico y
el conteo de lazos de contracciones de índices.
"""

__version__ = "0.1.0"
