"""
Logging-Infrastruktur für das Robust-MPC-Toolkit.

Bietet strukturiertes Logging mit JSON-Format, Performance-Tracking
und spezielle Log-Methoden für SCR-Iterationen, Solver-Aufrufe und Zertifikate.
"""

import logging
import json
import sys
import os
import time
import functools
from datetime import datetime
from typing import Dict, Any, Optional
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

load_dotenv()


class PerformanceTracker:
    """Verfolgt die Laufzeit einer Operation."""

    def __init__(self, operation_name: str, logger: logging.Logger):
        self.operation_name = operation_name
        self.logger = logger
        self.start_time: Optional[float] = None
        self.duration: float = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.logger.debug(f"🚀 Starting {self.operation_name}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is not None:
            self.duration = time.perf_counter() - self.start_time
            if exc_type:
                self.logger.error(f"❌ {self.operation_name} failed after {self.duration:.2f}s: {exc_val}")
            else:
                self.logger.info(f"✅ {self.operation_name} completed in {self.duration:.2f}s")


def _json_default(value: Any) -> Any:
    """numpy-Skalare und -Arrays aus Solver- und Zertifikatsfeldern; inf/nan als String."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value if isinstance(value, (int, float, str, bool)) else str(value)


class StructuredFormatter(logging.Formatter):
    """JSON-Lines: eine Zeile je Record, custom_-Felder ohne Präfix auf oberster Ebene."""

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'location': f"{record.module}.{record.funcName}:{record.lineno}",
            'message': record.getMessage(),
        }

        if record.threadName != 'MainThread':
            log_data['thread'] = record.threadName

        if record.exc_info:
            exc_type, exc_value, _ = record.exc_info
            log_data['exception'] = {
                'type': exc_type.__name__ if exc_type else None,
                'exit_code': getattr(exc_value, 'exit_code', None),
                'message': str(exc_value) if exc_value else '',
                'traceback': self.formatException(record.exc_info),
            }

        log_data.update({key[7:]: value for key, value in record.__dict__.items()
                         if key.startswith('custom_')})
        return json.dumps(log_data, ensure_ascii=False, default=_json_default)


class SCRLogger:
    """Zentrale Logging-Klasse für Restriktionsaufbau, Solver und Verifikation."""

    def __init__(self, name: str = 'scr_mpc', level: str = 'INFO', file_logging: bool = True):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(getattr(logging, level.upper()))

        # Verhindere doppelte Handler
        if self.logger.handlers:
            return

        self._setup_handlers(file_logging)

    def _setup_handlers(self, file_logging: bool):
        """Konfiguriert Console- und Datei-Handler."""
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.INFO)
        console_format = '%(asctime)s - %(levelname)s - [%(funcName)s:%(lineno)d] - %(message)s'
        console_handler.setFormatter(logging.Formatter(console_format))
        self.logger.addHandler(console_handler)

        if not file_logging:
            return

        try:
            log_dir = Path(os.getenv('SCR_LOG_DIR', 'logs'))
            log_dir.mkdir(exist_ok=True)

            file_handler = logging.FileHandler(log_dir / 'scr.log', encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(StructuredFormatter())
            self.logger.addHandler(file_handler)

            # Separater Handler für Errors
            error_handler = logging.FileHandler(log_dir / 'errors.log', encoding='utf-8')
            error_handler.setLevel(logging.ERROR)
            error_handler.setFormatter(StructuredFormatter())
            self.logger.addHandler(error_handler)

        except OSError as e:
            self.logger.warning(f"Could not setup file logging: {e}")

    def track_performance(self, operation_name: str) -> PerformanceTracker:
        """Context Manager für Performance-Tracking."""
        return PerformanceTracker(operation_name, self.logger)

    def log_iteration(self, iteration: int, objective: float, change: Optional[float],
                      status: str, **kwargs):
        """Eine SCR-Iteration (Zielfunktion c^u und Änderung)."""
        extra_data = {
            'custom_iteration': iteration,
            'custom_objective': objective,
            'custom_change': change,
            'custom_status': status,
        }
        extra_data.update({f'custom_{k}': v for k, v in kwargs.items()})
        change_txt = f"{change:.3e}" if change is not None else "n/a"
        self.logger.info(
            f"SCR iteration {iteration}: c^u={objective:.6g} (change {change_txt}) -> {status}",
            extra=extra_data
        )

    def log_solve(self, backend: str, status: str, iterations: Optional[int],
                  wall_time: float, violation: Optional[float] = None, **kwargs):
        """Ein Conic-Solve inklusive Nachprüfung."""
        extra_data = {
            'custom_backend': backend,
            'custom_status': status,
            'custom_solver_iterations': iterations,
            'custom_wall_time': wall_time,
            'custom_max_violation': violation,
        }
        extra_data.update({f'custom_{k}': v for k, v in kwargs.items()})

        if status != 'optimal':
            self.logger.warning(f"Conic solve via {backend}: {status}", extra=extra_data)
        else:
            self.logger.debug(f"Conic solve via {backend}: {status} in {wall_time:.3f}s", extra=extra_data)

    def log_certificate(self, kind: str, gamma: float, cost_upper: Optional[float],
                        census_total: Optional[int] = None):
        """Ein ausgestelltes Zertifikat (Lösung oder Marge)."""
        extra_data = {
            'custom_kind': kind,
            'custom_gamma': gamma,
            'custom_cost_upper': cost_upper,
            'custom_census_total': census_total,
        }
        cost_txt = f"{cost_upper:.6g}" if cost_upper is not None else "n/a"
        self.logger.info(f"Certificate ({kind}): gamma={gamma:.6g}, c^u={cost_txt}", extra=extra_data)

    def debug(self, message: str, **kwargs):
        self.logger.debug(message, extra=kwargs)

    def info(self, message: str, **kwargs):
        self.logger.info(message, extra=kwargs)

    def warning(self, message: str, **kwargs):
        self.logger.warning(message, extra=kwargs)

    def error(self, message: str, exc_info: bool = False, **kwargs):
        self.logger.error(message, exc_info=exc_info, extra=kwargs)

    def critical(self, message: str, exc_info: bool = True, **kwargs):
        self.logger.critical(message, exc_info=exc_info, extra=kwargs)


# Konfiguration aus Umgebungsvariablen
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
ENABLE_FILE_LOGGING = os.getenv('ENABLE_FILE_LOGGING', 'true').lower() == 'true'

if LOG_LEVEL not in ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']:
    LOG_LEVEL = 'INFO'

# Globale Logger-Instanz für einfachen Import
logger = SCRLogger(level=LOG_LEVEL, file_logging=ENABLE_FILE_LOGGING)


def write_health_check(success: bool, command: str, error_msg: str = "",
                       additional_metrics: Optional[Dict[str, Any]] = None,
                       path: str = 'health.json') -> None:
    """Schreibt den Status des letzten CLI-Laufs für Monitoring."""
    from .. import __version__

    health_data = {
        "timestamp": datetime.now().isoformat(),
        "success": success,
        "command": command,
        "error_message": error_msg,
        "version": __version__,
        "system_info": {
            "python_version": sys.version.split()[0],
            "platform": sys.platform
        }
    }

    if additional_metrics:
        health_data["metrics"] = additional_metrics

    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(health_data, f, indent=2, ensure_ascii=False, default=str)
        logger.debug(f"Health check written: success={success}, command={command}")
    except OSError as e:
        logger.error(f"Failed to write health check: {e}", exc_info=True)


def handle_exceptions(operation_name: str):
    """Decorator: Laufzeit messen, Fehler loggen und weiterreichen."""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                with logger.track_performance(operation_name):
                    return func(*args, **kwargs)
            except Exception as e:
                logger.error(f"Error in {operation_name}: {e}", exc_info=True)
                raise
        return wrapper
    return decorator


__all__ = [
    'SCRLogger', 'logger', 'PerformanceTracker', 'StructuredFormatter',
    'write_health_check', 'handle_exceptions'
]
