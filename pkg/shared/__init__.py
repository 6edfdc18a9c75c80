"""Módulos compartidos de riskx: configuración, logging y salida tabular."""
