"""
Zentrale Konfigurationsdatei für das Robust-MPC-Toolkit (Sequential Convex Restriction).

Diese Datei enthält alle einstellbaren Parameter für:
- Conic-Solver und Toleranzen
- SCR-Iteration (Konvergenz, Sicherheitsabstand)
- Envelopes und Vertex-Enumeration
- Monte-Carlo-Verifikation
- Receding-Horizon-Betrieb und Benchmark-Tabelle
- Ausgabeformate
"""

import os
from typing import Dict, List, Any, Optional
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()

# === SOLVER KONFIGURATION ===
SOLVER_CONFIG = {
    'backend': os.getenv('SCR_BACKEND', 'cvxpy'),   # Registrierter Backend-Name
    'solver': os.getenv('SCR_SOLVER', 'CLARABEL'),  # cvxpy-Solver (CLARABEL, ECOS, SCS)
    'feasibility_tol': 1e-8,    # Primale/duale Zulässigkeitstoleranz
    'gap_tol': 1e-8,            # Relative Dualitätslücke
    'max_iterations': 200,      # Iterationslimit des Interior-Point-Verfahrens
    'recheck_tol': 1e-6,        # Unabhängige Nachprüfung der Lösung (normiert pro Zeile)
    'psd_tol': 1e-10,           # Eigenwert-Toleranz für PSD-Prüfungen
}

# === SCR KONFIGURATION ===
SCR_CONFIG = {
    'epsilon': 1e-3,            # Abbruch bei Zielfunktionsänderung < epsilon
    'max_iterations': 50,       # Maximale Anzahl SCR-Iterationen
    'eps_safe': 1e-6,           # Strikte Ungleichung der Sicherheitsbedingung als <= -eps_safe
}

# === ENVELOPE KONFIGURATION ===
ENVELOPE_CONFIG = {
    'rho1': 1.0,                # Bilineare Unterschranke
    'rho2': 1.0,                # Bilineare Oberschranke
    'rho_trig_product': 1.0,    # Gewichtung Δv² vs Δθ² für v·cosθ / v·sinθ
    'max_sparsity': 8,          # Obergrenze |I_k| für die 2^|I_k| Vertex-Enumeration
    'falsify_inflation': 0.5,   # Testbereich = Tube um 50% aufgeweitet
    'falsify_samples': 10000,   # Stichproben für Soundness-Falsifikation
    'soundness_tol': 1e-9,      # Zulässige Verletzung
    'convexity_tol': 1e-10,     # Eigenwert-Toleranz für Konvexität/Konkavität
}

# === MODELL KONFIGURATION ===
MODEL_CONFIG = {
    'rank_tol': 1e-10,          # Relative Singulärwert-Toleranz für rank(C_t) = n
    'fd_step': 1e-6,            # Zentrale Differenzen: Schritt 1e-6 * (1 + |z|)
    'consistency_samples': 100, # Stichproben pro Stufe für f = M psi(Cx, u)
    'consistency_tol': 1e-9,    # Relative Toleranz der Darstellungsprüfung
    'default_step': 0.05,       # Euler-Schrittweite des Fahrzeug-Benchmarks
}

# === VERIFIKATION ===
VERIFY_CONFIG = {
    'samples': 1000,            # Monte-Carlo-Stichproben
    'boundary_fraction': 0.5,   # Anteil der Stichproben auf dem Ellipsoidrand
    'max_workers': int(os.getenv('SCR_MAX_WORKERS', '4')),  # Threads für Rollouts
    'containment_tol': 1e-7,    # Tube-Austritt erst ab diesem Überstand (Rundung des Solvers, 0 = exakt)
    'cost_tol': 1e-6,           # Kostenüberschreitung relativ zu c^u
    'bisection_steps': 30,      # Bisektionsschritte für die empirische Marge
}

# === RECEDING HORIZON ===
MPC_CONFIG = {
    'replan_period': 5,         # 0.25 s bei h = 0.05
    'total_steps': 80,          # Länge eines Closed-Loop-Laufs
}

# === BENCHMARK-TABELLE ===
BENCHMARK_CONFIG = {
    'horizons': [10, 20, 30, 40],   # Prädiktionshorizonte der Tabelle
    'closed_loop_steps': 80,        # Schritte für die nominellen Closed-Loop-Kosten
}

# === AUSGABE ===
OUTPUT_CONFIG = {
    'schema_version': 1,        # Version des Szenario- und Ergebnisformats
    'float_format': '%.12g',    # Stabile CSV-Formatierung
    'default_out_dir': 'results',
}


@dataclass
class SolverTolerances:
    """Toleranzen für einen einzelnen Conic-Solve."""
    feasibility: float = SOLVER_CONFIG['feasibility_tol']
    gap: float = SOLVER_CONFIG['gap_tol']
    max_iterations: int = SOLVER_CONFIG['max_iterations']
    recheck: float = SOLVER_CONFIG['recheck_tol']

    def __post_init__(self):
        if self.feasibility <= 0 or self.gap <= 0 or self.recheck <= 0:
            raise ValueError("Solver tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SCROptions:
    """Parameter der SCR-Schleife."""
    epsilon: float = SCR_CONFIG['epsilon']
    max_iterations: int = SCR_CONFIG['max_iterations']
    eps_safe: float = SCR_CONFIG['eps_safe']
    backend: str = SOLVER_CONFIG['backend']
    solver: Optional[str] = SOLVER_CONFIG['solver']
    tolerances: Optional[SolverTolerances] = None

    def __post_init__(self):
        if self.tolerances is None:
            self.tolerances = SolverTolerances()
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.eps_safe < 0:
            raise ValueError("eps_safe must be nonnegative")


# === VALIDIERUNG ===
def validate_config() -> List[str]:
    """Validiert die Konfiguration und gibt Warnungen zurück."""
    warnings = []

    if SOLVER_CONFIG['recheck_tol'] < SOLVER_CONFIG['feasibility_tol']:
        warnings.append("WARNING: recheck_tol kleiner als Solver-Toleranz, Nachprüfung wird scheitern!")

    if SCR_CONFIG['eps_safe'] <= 0:
        warnings.append("WARNING: eps_safe = 0 erlaubt Berührung der Hindernisse!")

    if ENVELOPE_CONFIG['max_sparsity'] > 10:
        warnings.append("WARNING: max_sparsity > 10 erzeugt sehr viele Vertex-Constraints!")

    if not 0.0 <= VERIFY_CONFIG['boundary_fraction'] <= 1.0:
        warnings.append("ERROR: boundary_fraction muss in [0, 1] liegen!")

    if MPC_CONFIG['replan_period'] < 1:
        warnings.append("ERROR: replan_period muss >= 1 sein!")

    if VERIFY_CONFIG['max_workers'] < 1:
        warnings.append("ERROR: max_workers muss >= 1 sein!")

    return warnings


def get_runtime_settings() -> Dict[str, Any]:
    """Gibt die aktiven Laufzeit-Einstellungen für das Run-Log zurück."""
    return {
        'solver': dict(SOLVER_CONFIG),
        'scr': dict(SCR_CONFIG),
        'envelope': dict(ENVELOPE_CONFIG),
        'verify': dict(VERIFY_CONFIG),
        'mpc': dict(MPC_CONFIG),
    }


# === EXPORTIERE HAUPTKONFIGURATIONEN ===
__all__ = [
    'SOLVER_CONFIG', 'SCR_CONFIG', 'ENVELOPE_CONFIG', 'MODEL_CONFIG',
    'VERIFY_CONFIG', 'MPC_CONFIG', 'BENCHMARK_CONFIG', 'OUTPUT_CONFIG',
    'SolverTolerances', 'SCROptions', 'validate_config', 'get_runtime_settings'
]
