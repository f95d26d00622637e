"""
Configuration constants and utility functions for the referendum simulator.
"""

import os
import sys
from pathlib import Path

def get_app_data_dir() -> str:
    """Per-user data directory (log files live under it)."""
    if sys.platform == "win32":
        base = os.getenv("APPDATA") or os.path.join(Path.home(), "AppData", "Roaming")
    elif sys.platform == "darwin":
        base = os.path.join(Path.home(), "Library", "Application Support")
    else:
        base = os.getenv("XDG_DATA_HOME") or os.path.join(Path.home(), ".local", "share")
    return os.path.join(base, "ReferendumLedger")


def ensure_directory(dir_path: str) -> str:
    """Ensure directory exists, create if it doesn't."""
    os.makedirs(dir_path, exist_ok=True)
    return dir_path

def get_bundled_scenarios_dir() -> str:
    """Directory holding the scenario files shipped with the repository."""
    return str(Path(__file__).resolve().parent.parent / "scenarios")

def list_bundled_scenarios() -> list:
    """Names (without extension) of all bundled scenarios."""
    scenarios_dir = Path(get_bundled_scenarios_dir())
    if not scenarios_dir.is_dir():
        return []
    return sorted(p.stem for p in scenarios_dir.glob("*.json"))

def format_duration(seconds: float) -> str:
    """Format a duration for the trace timing line."""
    if seconds < 1.0:
        return f"{seconds * 1000:.1f} ms"
    return f"{seconds:.3f} s"

# Application constants
APP_NAME = "Referendum Ledger"
APP_VERSION = "1.0.0"
APP_DESCRIPTION = "Ledger-based referendum protocol simulator and verifier"
LOGGER_NAME = "ReferendumLedger"

# Field and sharing defaults
DEFAULT_MODULUS = 2**31 - 1
DEFAULT_DEADLINES = {"q12": 1, "q23": 5, "q34": 9}
DEFAULT_QUESTION = "Are cats cooler than dogs?"
DEFAULT_OPTIONS = {"+1": "Yes", "-1": "No"}

# Crypto and ledger
DEFAULT_CRYPTO_SUITE = "ed25519"
DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)

# Output artifacts
LEDGER_DUMP_NAME = "ledger.dump"
REPORT_NAME = "report.txt"
TRACE_NAME = "trace.txt"
DEFAULT_OUTPUT_DIR = "out"

# Process exit codes
EXIT_VALID = 0
EXIT_CONFIG_ERROR = 1
EXIT_INVALID = 2
EXIT_INCONCLUSIVE = 3
