"""Subflujos aleatorios basados en contador (Philox)."""

import numpy as np

# Palabras altas del contador que separan los usos de un mismo seed
SIMULATION_STREAM = 0
GEOMETRY_STREAM = 1
CHECK_STREAM = 2

_WORD = 1 << 64


def substream(seed: int, index: int, tag: int = SIMULATION_STREAM) -> np.random.Generator:
    """
    Devuelve el generador asociado a (seed, index, tag).

    El generador depende sólo de esa terna, no del worker que lo use, de modo
    que cualquier réplica puede reproducirse de forma aislada. Las palabras
    bajas del contador avanzan con cada extracción (índice de draw).

    Args:
        seed: Semilla global (>= 0)
        index: Índice de réplica o de bloque (>= 0)
        tag: Uso del subflujo (simulación, geometría, comprobaciones)

    Returns:
        Generador numpy sobre Philox
    """
    if seed < 0 or index < 0 or tag < 0:
        raise ValueError(f"seed, index y tag deben ser >= 0: {seed}, {index}, {tag}")
    counter = np.array([0, 0, index % _WORD, tag % _WORD], dtype=np.uint64)
    bit_generator = np.random.Philox(key=seed % (1 << 128), counter=counter)
    return np.random.Generator(bit_generator)
