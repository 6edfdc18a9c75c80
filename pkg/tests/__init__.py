"""Tests de riskx."""
