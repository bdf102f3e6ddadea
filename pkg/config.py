"""
Configuration for the modcup trilinear-form toolkit
"""

import os

# Numerical defaults shared by all modules
NUMERICS_CONFIG = {
    'truncation': 30,  # M for every q-expansion in the reference table
    'tol': 1e-10,
    'tail_safety': 10.0,  # multiplies empirical coefficient/decay envelopes
    'jacobi_start_nodes': 16,
    'jacobi_max_nodes': 1024,
    'max_rule_nodes': 256,
    'panel_budget': 2 ** 14,
    'ray_samples': 9,
    'y_min': 3 ** 0.5 / 2,  # lowest point of the standard fundamental domain
    'series_ratio_limit': 0.99,
    'svd_threshold': 1e-9,
    'svd_margin': 1e3,
    'max_word_length': 64,
}

# Run settings (environment overrides first)
RUN_CONFIG = {
    'threads': int(os.environ.get('MODCUP_THREADS') or os.cpu_count() or 1),
    'seed': int(os.environ.get('MODCUP_SEED', '20240101')),
    'format': 'csv',
    'log_level': os.environ.get('MODCUP_LOG_LEVEL', 'WARNING'),
}

# Accepted ranges for command-line parameters
RUN_LIMITS = {
    'tol': (1e-12, 1e-2),
    'M': (5, 500),
    'rmax': (2, 40),
}

# reference grid: rows r1, columns r2
TABLE_GRID = {
    'r1': [-0.3, -0.7, -1.1, -1.5, -2.4],
    'r2': [0.2, 0.6, 1.3, 1.8],
}

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')
TABLE_REFERENCE_FILE = os.path.join(DATA_DIR, 'reference_cells.ref')
