#!/usr/bin/env python3
"""Interfaz de línea de comandos de riskx: expand, geometry, simulate y loops."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from riskx.contraction import enumerate_pattern, identity_pattern, normal_pattern
from riskx.errors import ContractViolationError, InvalidInputError
from riskx.expansion import (
    expansion_for_family,
    expansion_general,
    expansion_mixture_family,
    expansion_multinomial_closed,
)
from riskx.geometry import (
    DEFAULT_MC_SAMPLES,
    analytic_invariants,
    estimate_invariants,
    positivity_ok,
)
from riskx.models import (
    ModelFamily,
    MultinomialModel,
    ParamPoint,
    TwoNormalMixtureModel,
    ZeroMeanNormalModel,
)
from riskx.simulation import SimulationPlan, invariance_check_normal, simulate_risk
from shared.config_loader import ConfigLoader
from shared.utils import DEFAULT_PRECISION, MAX_PRECISION, ensure_dir, setup_logging, write_rows

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

EXPAND_COLUMNS = ["model", "theta", "alpha", "n", "c1", "c2", "value", "provenance"]
GEOMETRY_COLUMNS = [
    "model", "theta", "source", "alpha", "f_e", "f_m", "f_alpha", "tt", "tdtd",
    "r_contract", "s_ee_cross", "s_ee_trace", "s_em_cross", "s_em_trace",
    "se_f_e", "se_f_m", "se_tt", "se_tdtd", "se_r_contract", "positivity",
    "n", "risk_value", "binomial_value", "mc_count",
]
SIMULATE_COLUMNS = [
    "model", "theta", "alpha", "n", "reps", "policy", "mean", "std_error",
    "reps_used", "infinite_count", "expansion_value", "z_score",
]
INVARIANCE_COLUMNS = [
    "model", "sigma_a", "sigma_b", "alpha", "n", "reps", "mean_a", "mean_b",
    "difference", "tolerance", "passed",
]
LOOPS_COLUMNS = ["pattern", "combinations", "histogram", "polynomial", "summary"]

Row = Dict[str, Any]


def parse_vector(text: str) -> List[float]:
    """Convierte "0.2,0.3" en [0.2, 0.3]."""
    try:
        return [float(item) for item in str(text).split(",") if item.strip()]
    except ValueError:
        raise InvalidInputError(f"Vector numérico inválido: {text!r}")


def theta_grid(start: float, stop: float, step: float) -> List[float]:
    """Rejilla inclusiva start, start+step, ..., stop."""
    if not step > 0 or stop < start:
        raise InvalidInputError(f"Rejilla inválida: {start} {stop} {step}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def theta_summary(values: Sequence[float]) -> str:
    return ";".join(f"{v:.6g}" for v in values)


class RiskxRunner:
    """Orquesta los subcomandos y produce filas de resultados."""

    def __init__(self, workers: int = 1, verbose: bool = False):
        """
        Inicializa el runner.

        Args:
            workers: Paralelismo máximo para geometry y simulate
            verbose: Activa el nivel DEBUG
        """
        self.logger = setup_logging(logging.DEBUG if verbose else logging.INFO)
        self.workers = max(1, int(workers))

    # Construcción de familias

    def build_family(self, args: argparse.Namespace) -> Tuple[ModelFamily, List[ParamPoint]]:
        """
        Crea la familia y los puntos θ pedidos en la línea de comandos.

        Raises:
            InvalidInputError: Si faltan parámetros o son inválidos
        """
        if args.model == "multinomial":
            vectors = [parse_vector(v) for v in (args.probs or [])]
            if not vectors:
                raise InvalidInputError("--probs es obligatorio para la multinomial")
            sizes = {len(v) for v in vectors}
            if len(sizes) != 1:
                raise InvalidInputError("Todos los vectores --probs deben tener la misma dimensión")
            family: ModelFamily = MultinomialModel(sizes.pop())
            thetas = [family.point(v) for v in vectors]
        elif args.model == "normal":
            if args.dim is None:
                raise InvalidInputError("--dim es obligatorio para la normal")
            family = ZeroMeanNormalModel(args.dim)
            if getattr(args, "sigma", None):
                thetas = [family.point(parse_vector(args.sigma))]
            else:
                thetas = [family.point_from_matrix(np.eye(args.dim))]
        else:
            family = TwoNormalMixtureModel(args.sigma2)
            grid = getattr(args, "theta_grid", None)
            values = theta_grid(*grid) if grid else (args.theta or [])
            if not values:
                raise InvalidInputError("--theta o --theta-grid es obligatorio para la mezcla")
            thetas = [family.point([v]) for v in values]

        for theta in thetas:
            family.require_interior(theta)
        return family, thetas

    def _mixture_expansion(self, family: ModelFamily, theta: ParamPoint, alpha: float,
                           mc_samples: int, seed: int):
        invariants = estimate_invariants(family, theta, alpha, mc_samples, seed, self.workers)
        return invariants, expansion_mixture_family(invariants, family.param_dim, alpha)

    def _theta_label(self, family: ModelFamily, theta: ParamPoint) -> str:
        if isinstance(family, ZeroMeanNormalModel):
            return f"p={family.p};" + theta_summary(theta.coords)
        return theta_summary(theta.coords)

    # Subcomandos

    def expand(self, args: argparse.Namespace) -> List[Row]:
        """Evalúa la expansión del riesgo en la rejilla (θ, α, n)."""
        family, thetas = self.build_family(args)
        rows = []
        for theta in thetas:
            for alpha in args.alpha:
                if isinstance(family, TwoNormalMixtureModel):
                    _, result = self._mixture_expansion(family, theta, alpha,
                                                        args.mc_samples, args.seed)
                else:
                    result = expansion_for_family(family, theta, alpha)
                for n in args.n:
                    rows.append({
                        "model": family.name, "theta": self._theta_label(family, theta),
                        "alpha": alpha, "n": n, "c1": result.c1, "c2": result.c2,
                        "value": result.value(n), "provenance": result.provenance,
                    })
        return rows

    def geometry(self, args: argparse.Namespace) -> List[Row]:
        """Invariantes analíticos y/o de Monte Carlo para cada θ."""
        family, thetas = self.build_family(args)
        alpha = args.alpha[0]
        n = args.n[0]
        rows = []
        for theta in thetas:
            sources = []
            has_analytic = not isinstance(family, TwoNormalMixtureModel)
            if has_analytic and args.mode in ("analytic", "both"):
                sources.append(("analytic", analytic_invariants(family, theta, alpha)))
            if args.mode in ("mc", "both") or not has_analytic:
                sources.append(("monte-carlo", estimate_invariants(
                    family, theta, alpha, args.mc_samples, args.seed, self.workers)))

            for source, inv in sources:
                if isinstance(family, TwoNormalMixtureModel):
                    result = expansion_mixture_family(inv, family.param_dim, alpha)
                    binomial = expansion_multinomial_closed(theta.coords, alpha).value(n)
                else:
                    result = expansion_general(inv, family.param_dim, alpha)
                    binomial = None
                row: Row = {
                    "model": family.name, "theta": self._theta_label(family, theta),
                    "source": source, "alpha": alpha, **inv.as_dict(),
                    "positivity": positivity_ok(inv), "n": n,
                    "risk_value": result.value(n), "binomial_value": binomial,
                    "mc_count": inv.mc_count,
                }
                if source == "monte-carlo":
                    for name in ("f_e", "f_m", "tt", "tdtd", "r_contract"):
                        row[f"se_{name}"] = inv.std_error(name)
                rows.append(row)
        return rows

    def simulate(self, args: argparse.Namespace) -> List[Row]:
        """Riesgo empírico con columnas de comparación frente a la expansión."""
        family, thetas = self.build_family(args)
        if args.check_invariance:
            return self._invariance_rows(family, thetas[0], args)

        rows = []
        for theta in thetas:
            for alpha in args.alpha:
                if isinstance(family, TwoNormalMixtureModel):
                    _, expansion = self._mixture_expansion(family, theta, alpha,
                                                           args.mc_samples, args.seed)
                else:
                    expansion = expansion_for_family(family, theta, alpha)
                for n in args.n:
                    plan = SimulationPlan(family, theta, alpha, n, args.reps, args.seed,
                                          args.policy, self.workers)
                    estimate = simulate_risk(plan, expansion)
                    rows.append({
                        "model": family.name, "theta": self._theta_label(family, theta),
                        "alpha": alpha, "n": n, "reps": args.reps, "policy": args.policy,
                        "mean": estimate.mean, "std_error": estimate.std_error,
                        "reps_used": estimate.reps_used,
                        "infinite_count": estimate.infinite_count,
                        "expansion_value": estimate.expansion_value,
                        "z_score": estimate.z_score,
                    })
        return rows

    def _invariance_rows(self, family: ModelFamily, theta: ParamPoint,
                         args: argparse.Namespace) -> List[Row]:
        if not isinstance(family, ZeroMeanNormalModel):
            raise InvalidInputError("--check-invariance sólo aplica al modelo normal")
        other = family.point(parse_vector(args.check_invariance))
        family.require_interior(other)
        rows = []
        for alpha in args.alpha:
            for n in args.n:
                report = invariance_check_normal(
                    family.p, family.matrix(theta), family.matrix(other), alpha, n,
                    args.reps, args.seed, self.workers,
                )
                rows.append({
                    "model": family.name, "sigma_a": theta_summary(theta.coords),
                    "sigma_b": theta_summary(other.coords), "alpha": alpha, "n": n,
                    "reps": args.reps, "mean_a": report.estimate_a.mean,
                    "mean_b": report.estimate_b.mean, "difference": report.difference,
                    "tolerance": report.tolerance, "passed": report.passed,
                })
        return rows

    def loops(self, args: argparse.Namespace) -> List[Row]:
        """Histograma de lazos y polinomio normalizado del patrón pedido."""
        if args.pattern == "identity":
            pattern = identity_pattern(args.k)
        else:
            pattern = normal_pattern(args.pattern.split("-", 1)[1])
        polynomial = enumerate_pattern(pattern, self.workers)
        self.logger.info(polynomial.summary())
        return [{
            "pattern": pattern.name, "combinations": polynomial.combinations,
            "histogram": polynomial.histogram_text(),
            "polynomial": polynomial.polynomial_text(), "summary": polynomial.summary(),
        }]

    def run(self, args: argparse.Namespace) -> Tuple[List[Row], List[str]]:
        """
        Ejecuta el subcomando elegido.

        Returns:
            Tupla (filas, columnas)
        """
        self.logger.info("=" * 60)
        self.logger.info(f"riskx {args.command}")
        self.logger.info("=" * 60)
        if args.command == "expand":
            return self.expand(args), EXPAND_COLUMNS
        if args.command == "geometry":
            return self.geometry(args), GEOMETRY_COLUMNS
        if args.command == "simulate":
            columns = INVARIANCE_COLUMNS if args.check_invariance else SIMULATE_COLUMNS
            return self.simulate(args), columns
        return self.loops(args), LOOPS_COLUMNS


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Fichero JSON clave-valor con valores por defecto de los flags")
    parser.add_argument("--format", choices=["csv", "jsonl"], default="csv",
                        help="Formato de salida (por defecto: csv)")
    parser.add_argument("--output", help="Fichero de salida (por defecto: stdout)")
    parser.add_argument("--precision", type=int, default=DEFAULT_PRECISION,
                        choices=range(1, MAX_PRECISION + 1), metavar="DIGITS",
                        help="Cifras significativas de los números (1-15, por defecto: 6)")
    parser.add_argument("--seed", type=int, help="Semilla (por defecto: RISKX_SEED o 0)")
    parser.add_argument("--workers", type=int,
                        help="Paralelismo máximo (por defecto: RISKX_WORKERS o núcleos disponibles)")
    parser.add_argument("--verbose", action="store_true", help="Logging en nivel DEBUG")


def _add_model(parser: argparse.ArgumentParser, theta_grid_option: bool = False) -> None:
    parser.add_argument("--model", choices=["multinomial", "normal", "mixture"], required=True,
                        help="Familia paramétrica")
    parser.add_argument("--probs", nargs="+",
                        help="Probabilidades libres m_1..m_p separadas por comas (una o más)")
    parser.add_argument("--dim", type=int, help="Dimensión p del modelo normal")
    parser.add_argument("--sigma", help="Σ en coordenadas σ_ij (i<=j, por filas) separadas por comas")
    parser.add_argument("--sigma2", type=float, default=0.5,
                        help="Varianza conocida de la mezcla (por defecto: 0.5)")
    parser.add_argument("--theta", type=float, nargs="+", help="Valores de θ_1 de la mezcla")
    if theta_grid_option:
        parser.add_argument("--theta-grid", type=float, nargs=3, metavar=("START", "STOP", "STEP"),
                            help="Rejilla inclusiva de θ_1 para la mezcla")
    parser.add_argument("--alpha", type=float, nargs="+", default=[-1.0],
                        help="Valores de α (por defecto: -1)")
    parser.add_argument("--n", type=int, nargs="+", default=[10],
                        help="Tamaños muestrales (por defecto: 10)")
    parser.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES,
                        help="Extracciones de Monte Carlo para invariantes (por defecto: 100000)")


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    """Construye el parser principal y devuelve también los subparsers."""
    parser = argparse.ArgumentParser(
        prog="riskx",
        description=(
            "Expansión asintótica del riesgo del MLE bajo α-divergencia. "
            "Los números se escriben con 6 cifras significativas (--precision hasta 15); "
            "las celdas no disponibles se escriben como '-'."
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    expand = subparsers.add_parser("expand", help="Evalúa c1/n + c2/n²")
    _add_model(expand, theta_grid_option=True)

    geometry = subparsers.add_parser("geometry", help="Invariantes geométricos (analíticos y/o MC)")
    _add_model(geometry, theta_grid_option=True)
    geometry.add_argument("--mode", choices=["analytic", "mc", "both"], default="both",
                          help="Origen de los invariantes (por defecto: both)")

    simulate = subparsers.add_parser("simulate", help="Riesgo empírico por simulación")
    _add_model(simulate)
    simulate.add_argument("--reps", type=int, default=100_000,
                          help="Réplicas (por defecto: 100000)")
    simulate.add_argument("--policy", choices=["count-and-exclude", "propagate"],
                          default="count-and-exclude",
                          help="Tratamiento de divergencias infinitas")
    simulate.add_argument("--check-invariance", metavar="SIGMA_B",
                          help="Compara el riesgo en --sigma con otra Σ (coordenadas σ_ij)")

    loops = subparsers.add_parser("loops", help="Conteo de lazos de contracciones de índices")
    loops.add_argument("--pattern", choices=["normal-tt", "normal-tdtd", "identity"],
                       required=True, help="Patrón de contracción")
    loops.add_argument("--k", type=int, default=1, help="Segmentos del patrón identidad")

    subs = {"expand": expand, "geometry": geometry, "simulate": simulate, "loops": loops}
    for sub in subs.values():
        _add_common(sub)
    return parser, subs


def _apply_defaults(subs: Dict[str, argparse.ArgumentParser], loader: ConfigLoader,
                    file_defaults: Dict[str, Any]) -> None:
    env_defaults = {"seed": loader.get_default_seed(), "workers": loader.get_default_workers()}
    for sub in subs.values():
        actions = {action.dest: action for action in sub._actions}
        values = dict(env_defaults)
        for key, value in file_defaults.items():
            dest = key.replace("-", "_")
            if dest not in actions:
                continue
            action = actions[dest]
            if action.nargs in ("+", "*") and not isinstance(value, list):
                value = [value]
            values[dest] = value
        sub.set_defaults(**values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Función principal."""
    argv = list(sys.argv[1:] if argv is None else argv)
    logger = setup_logging()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)

    try:
        loader = ConfigLoader()
        file_defaults = loader.load_run_config(Path(known.config)) if known.config else {}
        parser, subs = build_parser()
        dests = {action.dest for sub in subs.values() for action in sub._actions}
        unknown = {key for key in file_defaults if key.replace("-", "_") not in dests}
        if unknown:
            raise InvalidInputError(f"Claves desconocidas en la configuración: {sorted(unknown)}")
        _apply_defaults(subs, loader, file_defaults)
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"Error de configuración: {e}")
        return EXIT_USAGE

    args = parser.parse_args(argv)
    runner = RiskxRunner(workers=args.workers, verbose=args.verbose)

    try:
        rows, columns = runner.run(args)
        if args.output:
            path = Path(args.output)
            ensure_dir(path.parent)
            with open(path, "w", encoding="utf-8", newline="") as handle:
                write_rows(rows, columns, handle, args.format, args.precision)
            runner.logger.info(f"{len(rows)} filas escritas en {path}")
        else:
            write_rows(rows, columns, sys.stdout, args.format, args.precision)
            sys.stdout.flush()
    except (InvalidInputError, ContractViolationError, ValueError) as e:
        runner.logger.error(f"Entrada inválida: {e}")
        return EXIT_USAGE
    except ArithmeticError as e:
        runner.logger.error(f"Fallo numérico: {e}")
        diagnostics = getattr(e, "diagnostics", None)
        if diagnostics:
            runner.logger.error(f"Diagnóstico: {diagnostics}")
        return EXIT_NUMERIC

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
