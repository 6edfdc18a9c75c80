"""Conteo de lazos en contracciones de índices σ y polinomios en p resultantes."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from riskx.errors import InvalidInputError, PatternTooLargeError

logger = logging.getLogger("riskx.contraction")

MAX_GENERATORS = 20


@dataclass(frozen=True)
class Segment:
    """Par de extremos distintos."""

    a: int
    b: int

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidInputError(f"Segmento con extremos iguales: ({self.a}, {self.b})")


@dataclass(frozen=True)
class Matching:
    """Emparejamiento perfecto: cada extremo aparece exactamente una vez."""

    segments: Tuple[Segment, ...]

    def __post_init__(self):
        endpoints = [e for s in self.segments for e in (s.a, s.b)]
        if len(set(endpoints)) != len(endpoints):
            raise InvalidInputError(f"Extremos repetidos en el emparejamiento: {sorted(endpoints)}")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[int, int]]) -> "Matching":
        return cls(tuple(Segment(int(a), int(b)) for a, b in pairs))

    @classmethod
    def from_flat(cls, flat: Sequence[int]) -> "Matching":
        """(1,3,4,6,2,5) significa los segmentos (1,3), (4,6), (2,5)."""
        if len(flat) % 2:
            raise InvalidInputError(f"Vector de longitud impar: {list(flat)}")
        return cls.from_pairs(list(zip(flat[0::2], flat[1::2])))

    @property
    def endpoints(self) -> frozenset:
        return frozenset(e for s in self.segments for e in (s.a, s.b))

    def partner(self) -> Dict[int, int]:
        mapping = {}
        for s in self.segments:
            mapping[s.a] = s.b
            mapping[s.b] = s.a
        return mapping

    def relabel(self, mapping: Dict[int, int]) -> "Matching":
        return Matching.from_pairs([(mapping[s.a], mapping[s.b]) for s in self.segments])


def count_loops(upper: Matching, lower: Matching) -> int:
    """
    Número de ciclos del multigrafo unión de dos emparejamientos perfectos.

    Args:
        upper: Emparejamiento de los índices superiores
        lower: Emparejamiento de los índices inferiores

    Returns:
        Número de lazos (>= 1)

    Raises:
        InvalidInputError: Si no emparejan el mismo conjunto de extremos
    """
    if upper.endpoints != lower.endpoints or not upper.segments:
        raise InvalidInputError("Los emparejamientos no cubren el mismo conjunto de extremos")
    up, down = upper.partner(), lower.partner()
    seen = set()
    loops = 0
    for start in up:
        if start in seen:
            continue
        loops += 1
        node = start
        # alterna segmento superior / inferior hasta cerrar el ciclo
        while True:
            seen.add(node)
            other = up[node]
            seen.add(other)
            node = down[other]
            if node == start:
                break
    return loops


@dataclass(frozen=True)
class ExchangeGenerator:
    """Involución sobre posiciones de uno de los vectores planos (intercambios disjuntos)."""

    side: str
    swaps: Tuple[Tuple[int, int], ...]
    weight: int = 1

    def __post_init__(self):
        if self.side not in ("upper", "lower"):
            raise InvalidInputError(f"Lado desconocido: {self.side}")
        positions = [p for swap in self.swaps for p in swap]
        if len(set(positions)) != len(positions):
            raise InvalidInputError(f"Los intercambios no son disjuntos: {self.swaps}")

    def apply(self, flat: List[int]) -> None:
        for i, j in self.swaps:
            flat[i], flat[j] = flat[j], flat[i]


@dataclass(frozen=True)
class ContractionPattern:
    """Par de vectores planos base, generadores de intercambio y normalización."""

    upper: Tuple[int, ...]
    lower: Tuple[int, ...]
    generators: Tuple[ExchangeGenerator, ...] = ()
    normalization: Fraction = Fraction(1)
    name: str = "custom"

    def __post_init__(self):
        Matching.from_flat(self.upper)
        Matching.from_flat(self.lower)
        if sorted(self.upper) != sorted(self.lower):
            raise InvalidInputError("Los vectores superior e inferior usan extremos distintos")
        size = len(self.upper)
        for generator in self.generators:
            if any(not 0 <= p < size for swap in generator.swaps for p in swap):
                raise InvalidInputError(f"Intercambio fuera de rango en {generator}")

    @property
    def k(self) -> int:
        return len(self.upper) // 2

    def matchings(self, mask: int) -> Tuple[Matching, Matching]:
        upper, lower = list(self.upper), list(self.lower)
        for bit, generator in enumerate(self.generators):
            if mask >> bit & 1:
                generator.apply(upper if generator.side == "upper" else lower)
        return Matching.from_flat(upper), Matching.from_flat(lower)

    def weight(self, mask: int) -> int:
        weight = 1
        for bit, generator in enumerate(self.generators):
            if mask >> bit & 1:
                weight *= generator.weight
        return weight


@dataclass(frozen=True)
class LoopPolynomial:
    """Histograma de lazos Σ_d c_d p^d y su versión normalizada."""

    coefficients: Dict[int, int]
    normalization: Fraction = Fraction(1)
    name: str = "custom"
    combinations: int = field(default=0)

    def normalized(self) -> Dict[int, Fraction]:
        return {d: c * self.normalization for d, c in self.coefficients.items()}

    def evaluate(self, p: float) -> float:
        return float(sum(c * Fraction(p) ** d for d, c in self.normalized().items()))

    def histogram_text(self) -> str:
        return ",".join(str(self.coefficients[d]) for d in sorted(self.coefficients, reverse=True))

    def polynomial_text(self) -> str:
        parts = []
        for degree in sorted(self.coefficients, reverse=True):
            coef = self.normalized()[degree]
            if coef == 0:
                continue
            power = "" if degree == 0 else ("p" if degree == 1 else f"p^{degree}")
            if coef == 1 and power:
                text = power
            else:
                text = f"{coef}{power}"
            parts.append(text)
        return "+".join(parts).replace("+-", "-") or "0"

    def summary(self) -> str:
        return f"{self.histogram_text()} → {self.polynomial_text()}"


def _histogram_chunk(pattern: ContractionPattern, start: int, stop: int) -> Dict[int, int]:
    histogram: Dict[int, int] = {}
    for mask in range(start, stop):
        loops = count_loops(*pattern.matchings(mask))
        histogram[loops] = histogram.get(loops, 0) + pattern.weight(mask)
    return histogram


def enumerate_pattern(pattern: ContractionPattern, workers: int = 1) -> LoopPolynomial:
    """
    Recorre las 2^g combinaciones de generadores y acumula el histograma de lazos.

    Args:
        pattern: Patrón de contracción
        workers: Procesos para repartir bloques de combinaciones

    Returns:
        LoopPolynomial con los coeficientes por potencia de p

    Raises:
        PatternTooLargeError: Si hay más de 20 generadores
    """
    count = len(pattern.generators)
    if count > MAX_GENERATORS:
        raise PatternTooLargeError(
            f"Patrón con {count} generadores: 2^{count} combinaciones superan el límite 2^{MAX_GENERATORS}"
        )
    total = 1 << count
    logger.info(f"Enumerando {total} combinaciones del patrón {pattern.name}")

    if workers <= 1 or total < 1024:
        histogram = _histogram_chunk(pattern, 0, total)
    else:
        bounds = [total * i // workers for i in range(workers + 1)]
        histogram = {}
        with ProcessPoolExecutor(max_workers=workers) as executor:
            parts = executor.map(_histogram_chunk, [pattern] * workers, bounds[:-1], bounds[1:])
            for part in parts:
                for loops, weight in part.items():
                    histogram[loops] = histogram.get(loops, 0) + weight

    return LoopPolynomial(dict(sorted(histogram.items())), pattern.normalization,
                          pattern.name, total)


# Intercambios dentro de cada T (bloques de 6) y de cada g (bloques de 4)
_T_SWAPS = ((0, 5), (1, 2), (3, 4))
_G_SWAPS = ((0, 2), (1, 3))


def _block_generators(side: str, blocks: int, width: int,
                      swaps: Tuple[Tuple[int, int], ...]) -> List[ExchangeGenerator]:
    generators = []
    for block in range(blocks):
        offset = block * width
        for i, j in swaps:
            generators.append(ExchangeGenerator(side, ((offset + i, offset + j),)))
    return generators


def normal_pattern(which: str) -> ContractionPattern:
    """
    Patrón de contracción de T·T ("tt") o Td·Td ("tdtd") para N_p(0, Σ).

    Las posiciones 1..6 de cada T son (i,k,l,s,t,j): los pares de índices son
    (1,6), (2,3) y (4,5). T·T une cada par de un T con el mismo par del otro;
    Td·Td contrae los dos primeros pares dentro de cada T y une los terceros.
    """
    upper = tuple(range(1, 13))
    if which == "tt":
        lower = (1, 7, 6, 12, 2, 8, 3, 9, 4, 10, 5, 11)
    elif which == "tdtd":
        lower = (1, 2, 6, 3, 7, 8, 12, 9, 4, 10, 5, 11)
    else:
        raise InvalidInputError(f"Patrón normal desconocido: {which}")
    generators = _block_generators("upper", 2, 6, _T_SWAPS) + _block_generators("lower", 3, 4, _G_SWAPS)
    return ContractionPattern(upper, lower, tuple(generators), Fraction(1, 512), f"normal-{which}")


def identity_pattern(k: int = 1) -> ContractionPattern:
    """k segmentos idénticos arriba y abajo, sin generadores: p^k."""
    if k < 1:
        raise InvalidInputError(f"k debe ser >= 1: {k}")
    flat = tuple(range(1, 2 * k + 1))
    return ContractionPattern(flat, flat, (), Fraction(1), f"identity-{k}")


def normal_invariant_via_loops(which: str, workers: int = 1) -> LoopPolynomial:
    """Polinomio en p de T·T o Td·Td del modelo normal por conteo de lazos."""
    return enumerate_pattern(normal_pattern(which.lower()), workers)
