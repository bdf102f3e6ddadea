"""
Utility functions for the modcup toolkit: logging, error types, output records.
"""

import csv
import io
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence

logger = logging.getLogger(__name__)


class ModcupError(Exception):
    """Base class for all errors raised by the toolkit."""

    code = "NUMERICAL_FAILURE"


class DomainError(ModcupError, ValueError):
    """Argument outside the domain of a function or rule."""

    code = "DOMAIN"


class PoleError(DomainError):
    """A Pochhammer factor in a denominator vanishes."""

    code = "POLE"


class InsufficientTruncationError(ModcupError):
    """A truncated q-expansion cannot meet the requested tail tolerance."""

    code = "TRUNCATION"

    def __init__(self, message: str, bound: float = float('nan')):
        super().__init__(message)
        self.bound = bound


class NonConvergenceError(ModcupError):
    """Adaptive quadrature ran out of panels or nodes."""

    code = "NON_CONVERGENCE"

    def __init__(self, message: str, estimate: complex = complex('nan'), error: float = float('nan')):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DecayViolationError(ModcupError):
    """Sampled integrand on a vertical ray exceeds its exponential envelope."""

    code = "DECAY"


class DivergenceError(ModcupError):
    """Series ratio too close to the unit circle on a contour."""

    code = "DIVERGENCE"


class ThresholdAmbiguityError(ModcupError):
    """Singular values too close to the numerical rank threshold."""

    code = "THRESHOLD_AMBIGUITY"


class UsageError(ModcupError):
    """Invalid run configuration (command-line usage)."""

    code = "USAGE"


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None):
    """Setup logging configuration."""
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format=log_format,
        handlers=[
            logging.StreamHandler(),  # stderr keeps stdout clean for CSV/JSON
        ],
        force=True,
    )

    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(log_format))
        logging.getLogger().addHandler(file_handler)


def format_float(value: float) -> str:
    """Locale-free float text with 17 significant digits."""
    return format(float(value), '.17g')


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV text; floats keep 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(x) if isinstance(x, float) else x for x in row])
    return buffer.getvalue()


def complex_record(params: Dict[str, Any], value: complex, error_estimate: float,
                   **extra: Any) -> Dict[str, Any]:
    """JSON record {params, value_re, value_im, error_estimate} for a computed value."""
    record = {
        'params': params,
        'value_re': float(complex(value).real),
        'value_im': float(complex(value).imag),
        'error_estimate': float(error_estimate),
    }
    record.update(extra)
    return record


def dump_record(record: Dict[str, Any]) -> str:
    """Serialize a record deterministically (sorted keys, round-trip floats)."""
    return json.dumps(record, sort_keys=True)


def load_reference_table(filepath: str) -> List[Dict[str, float]]:
    """Read `r1,r2,value,rel_tol` rows of a reference table, skipping comments."""
    rows = []
    with open(filepath, 'r', encoding='utf-8') as f:
        lines = [line for line in f if line.strip() and not line.lstrip().startswith('#')]
    for entry in csv.DictReader(lines):
        rows.append({key: float(val) for key, val in entry.items()})
    logger.info(f"Loaded {len(rows)} reference cells from {filepath}")
    return rows


def create_error_response(error_message: str, error_code: str = "UNKNOWN") -> Dict[str, Any]:
    """Create standardized error response."""
    return {
        'success': False,
        'error': {
            'message': error_message,
            'code': error_code,
            'timestamp': datetime.now().isoformat()
        }
    }
