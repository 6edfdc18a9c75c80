"""Cargador de configuración para riskx."""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv


class ConfigLoader:
    """Carga y gestiona la configuración de riskx (.env + fichero JSON)."""

    def __init__(self, config_dir: Optional[Path] = None):
        """
        Inicializa el cargador de configuración.

        Args:
            config_dir: Directorio donde están los archivos de configuración.
                       Si es None, usa el directorio config/ relativo a este módulo.
        """
        if config_dir is None:
            base_dir = Path(__file__).parent.parent
            config_dir = base_dir / "config"

        self.config_dir = config_dir
        self.base_dir = config_dir.parent

        # Cargar variables de entorno sin pisar las ya definidas
        env_file = self.base_dir / ".env"
        if not env_file.exists():
            env_file = self.base_dir / "env.example"

        if env_file.exists():
            load_dotenv(env_file, override=False)

    def load_env(self, key: str, default: Optional[str] = None) -> str:
        """
        Carga una variable de entorno.

        Args:
            key: Nombre de la variable de entorno
            default: Valor por defecto si no existe

        Returns:
            Valor de la variable de entorno

        Raises:
            ValueError: Si la variable no existe y no hay valor por defecto
        """
        value = os.getenv(key, default)
        if value is None:
            raise ValueError(f"Variable de entorno {key} no encontrada")
        return value

    def _load_int(self, key: str, default: int, minimum: int) -> int:
        raw = self.load_env(key, str(default))
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"Variable de entorno {key} no es un entero: {raw!r}")
        if value < minimum:
            raise ValueError(f"Variable de entorno {key} debe ser >= {minimum}: {value}")
        return value

    def get_default_seed(self) -> int:
        """
        Semilla por defecto (RISKX_SEED, 0 si no está definida).

        Returns:
            Semilla no negativa
        """
        return self._load_int("RISKX_SEED", 0, 0)

    def get_default_workers(self) -> int:
        """
        Número de workers por defecto (RISKX_WORKERS o núcleos disponibles).

        Returns:
            Número de workers (>= 1)
        """
        return self._load_int("RISKX_WORKERS", os.cpu_count() or 1, 1)

    def load_run_config(self, path: Path) -> Dict[str, Any]:
        """
        Carga un fichero de configuración clave-valor (objeto JSON).

        Las claves coinciden con los destinos de los flags de la CLI
        (p. ej. "mc_samples", "alpha").

        Args:
            path: Ruta del fichero

        Returns:
            Diccionario de valores por defecto

        Raises:
            FileNotFoundError: Si el archivo no existe
            ValueError: Si el contenido no es un objeto JSON
        """
        if not path.exists():
            example_file = self.config_dir / "riskx-config.example.json"
            raise FileNotFoundError(
                f"Archivo de configuración no encontrado: {path}\n"
                f"Usa {example_file} como plantilla."
            )

        with open(path, 'r', encoding='utf-8') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ValueError(f"Configuración JSON inválida en {path}: {e}")

        if not isinstance(data, dict):
            raise ValueError(f"La configuración de {path} debe ser un objeto JSON")
        return data
