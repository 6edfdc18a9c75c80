"""Utilidades compartidas para riskx."""

import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO

LOGGER_NAME = "riskx"
MISSING_CELL = "-"
DEFAULT_PRECISION = 6
MAX_PRECISION = 15


def setup_logging(level: int = logging.INFO) -> logging.Logger:
    """
    Configura el logging de riskx.

    Los mensajes van a stderr: stdout queda reservado para las filas de
    resultados.

    Args:
        level: Nivel de logging

    Returns:
        Logger configurado
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    for handler in logger.handlers:
        handler.setLevel(level)

    return logger


def ensure_dir(path: Path) -> Path:
    """
    Asegura que un directorio existe, creándolo si es necesario.

    Args:
        path: Ruta del directorio

    Returns:
        Path del directorio
    """
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_number(value: Any, precision: int = DEFAULT_PRECISION) -> str:
    """
    Formatea un valor numérico con `precision` cifras significativas.

    None y NaN se escriben como `-`; los infinitos como `inf` / `-inf`.

    Args:
        value: Valor a formatear (número, bool, str o None)
        precision: Cifras significativas (1..15)

    Returns:
        Representación textual de la celda
    """
    if not 1 <= precision <= MAX_PRECISION:
        raise ValueError(f"Precisión fuera de rango (1..{MAX_PRECISION}): {precision}")
    if value is None:
        return MISSING_CELL
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return MISSING_CELL
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{precision}g}"
    return str(value)


def _json_cell(text: str) -> Any:
    # Las celdas JSON conservan el mismo texto que el CSV, pero como número
    if text == MISSING_CELL:
        return None
    try:
        number = float(text)
    except ValueError:
        return text
    if math.isinf(number):
        return text
    return int(text) if text.lstrip("-").isdigit() else number


def write_rows(rows: Iterable[Dict[str, Any]], columns: List[str],
               output: TextIO, fmt: str = "csv",
               precision: int = DEFAULT_PRECISION) -> int:
    """
    Escribe filas de resultados en CSV o JSON-lines.

    Args:
        rows: Filas como diccionarios; las claves ausentes se escriben como `-`
        columns: Orden de las columnas (cabecera CSV / claves JSON)
        output: Flujo de salida
        fmt: "csv" o "jsonl"
        precision: Cifras significativas

    Returns:
        Número de filas escritas

    Raises:
        ValueError: Si el formato no es soportado
    """
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"Formato de salida no soportado: {fmt}")

    writer: Optional[Any] = None
    if fmt == "csv":
        writer = csv.writer(output, lineterminator="\n")
        writer.writerow(columns)

    count = 0
    for row in rows:
        cells = [format_number(row.get(column), precision) for column in columns]
        if writer is not None:
            writer.writerow(cells)
        else:
            record = {column: _json_cell(cell) for column, cell in zip(columns, cells)}
            output.write(json.dumps(record, ensure_ascii=False) + "\n")
        count += 1
    return count
