#!/usr/bin/env python3
"""
Command-line entry point: `modcup <command> [options]`.

Commands: table, tri, psi, haberland, coeffs, coinv, selftest.
Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

import argparse
import itertools
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

from config import NUMERICS_CONFIG, RUN_CONFIG, RUN_LIMITS, TABLE_GRID, TABLE_REFERENCE_FILE
from cocycle import poly_coinvariant_report, valid_parameters
from forms import coefficient_table, e4_expansion, eta_power_expansion
from selftest import run_selftest
from triform import (WeightTriple, cell_skip_reason, check_psi_domain, haberland_identity,
                     psi_tilde_with_error, table_forms, triple_form_direct, triple_form_grid,
                     triple_form_series)
from utils import (DomainError, ModcupError, UsageError, complex_record, create_error_response,
                   dump_record, load_reference_table, setup_logging, to_csv)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


@dataclass
class RunConfig:
    """Validated settings of one command-line run."""

    command: str
    r1: Optional[List[float]] = None
    r2: Optional[List[float]] = None
    M: int = NUMERICS_CONFIG['truncation']
    tol: float = NUMERICS_CONFIG['tol']
    format: str = RUN_CONFIG['format']
    out: Optional[str] = None
    threads: int = RUN_CONFIG['threads']
    seed: int = RUN_CONFIG['seed']
    check: Optional[str] = None
    log_level: str = RUN_CONFIG['log_level']
    all_cells: bool = False
    direct: bool = False
    mu: Tuple[Optional[float], Optional[float], Optional[float]] = (None, None, None)
    r: Optional[float] = None
    form: str = 'eta'
    rmax: int = 14

    def validate(self):
        lo, hi = RUN_LIMITS['tol']
        if not lo <= self.tol <= hi:
            raise UsageError(f"--tol must lie in [{lo:g}, {hi:g}], got {self.tol:g}")
        lo, hi = RUN_LIMITS['M']
        if not lo <= self.M <= hi:
            raise UsageError(f"--M must lie in [{lo}, {hi}], got {self.M}")
        if self.format not in ('csv', 'json'):
            raise UsageError(f"--format must be csv or json, got {self.format!r}")
        if self.threads < 1:
            raise UsageError(f"--threads must be positive, got {self.threads}")
        if self.command == 'coinv':
            lo, hi = RUN_LIMITS['rmax']
            if not lo <= self.rmax <= hi:
                raise UsageError(f"--rmax must lie in [{lo}, {hi}], got {self.rmax}")
        if self.command in ('tri', 'psi') and (len(self.r1 or []) != 1 or len(self.r2 or []) != 1):
            raise UsageError(f"{self.command} needs exactly one --r1 and one --r2")
        if self.command == 'psi' and None in self.mu:
            raise UsageError("psi needs --mu1, --mu2 and --mu3")
        if self.command == 'tri':
            reason = cell_skip_reason(self.r1[0], self.r2[0])
            if reason:
                raise UsageError(f"invalid weights for tri: {reason}")
        if self.command == 'psi':
            try:
                check_psi_domain(self.r1[0], self.r2[0], self.mu[1], self.mu[2])
            except DomainError as e:
                raise UsageError(f"invalid psi parameters: {e}") from e
        if self.command == 'haberland' and self.r is None:
            raise UsageError("haberland needs --r")
        if self.command == 'coeffs':
            if self.form == 'eta' and self.r is None:
                raise UsageError("coeffs --form eta needs --r")
            if self.form == 'f3' and (len(self.r1 or []) != 1 or len(self.r2 or []) != 1):
                raise UsageError("coeffs --form f3 needs one --r1 and one --r2")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--M', type=int, default=NUMERICS_CONFIG['truncation'], help='q-expansion truncation order')
    common.add_argument('--tol', type=float, default=NUMERICS_CONFIG['tol'], help='absolute tolerance')
    common.add_argument('--out', help='output file (default stdout)')
    common.add_argument('--format', default=None, choices=['csv', 'json'])
    common.add_argument('--threads', type=int, default=RUN_CONFIG['threads'])
    common.add_argument('--seed', type=int, default=RUN_CONFIG['seed'])
    common.add_argument('--log-level', default=RUN_CONFIG['log_level'],
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = argparse.ArgumentParser(prog='modcup', description='Cup-product trilinear forms for real-weight modular forms')
    sub = parser.add_subparsers(dest='command', required=True)

    table = sub.add_parser('table', parents=[common], help='bare triple sums over an (r1, r2) grid')
    table.add_argument('--r1', type=float, nargs='*')
    table.add_argument('--r2', type=float, nargs='*')
    table.add_argument('--all', action='store_true', dest='all_cells', help='the full 5 x 4 grid, blank cells included')
    table.add_argument('--check', nargs='?', const=TABLE_REFERENCE_FILE, help='reference file r1,r2,value,rel_tol')

    tri = sub.add_parser('tri', parents=[common], help='T(f1, f2, f3) for the table forms')
    tri.add_argument('--r1', type=float, nargs=1, required=True)
    tri.add_argument('--r2', type=float, nargs=1, required=True)
    tri.add_argument('--direct', action='store_true', help='also run the nested-quadrature oracle')

    psi = sub.add_parser('psi', parents=[common], help='one Psi kernel value')
    psi.add_argument('--r1', type=float, nargs=1, required=True)
    psi.add_argument('--r2', type=float, nargs=1, required=True)
    psi.add_argument('--mu1', type=float, required=True)
    psi.add_argument('--mu2', type=float, required=True)
    psi.add_argument('--mu3', type=float, required=True)

    haberland = sub.add_parser('haberland', parents=[common], help='both sides of the Haberland identity for eta^{2r}')
    haberland.add_argument('--r', type=float, required=True)

    coeffs = sub.add_parser('coeffs', parents=[common], help='coefficient dump m,mu,a')
    coeffs.add_argument('--form', choices=['eta', 'e4', 'f3'], default='eta')
    coeffs.add_argument('--r', type=float)
    coeffs.add_argument('--r1', type=float, nargs=1)
    coeffs.add_argument('--r2', type=float, nargs=1)

    coinv = sub.add_parser('coinv', parents=[common], help='coinvariant dimensions r,p,dim')
    coinv.add_argument('--rmax', type=int, default=14)

    sub.add_parser('selftest', parents=[common], help='run the property suites')
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    default_format = 'csv' if args.command in ('table', 'coeffs', 'coinv') else 'json'
    config = RunConfig(
        command=args.command,
        r1=getattr(args, 'r1', None),
        r2=getattr(args, 'r2', None),
        M=args.M,
        tol=args.tol,
        format=args.format or default_format,
        out=args.out,
        threads=args.threads,
        seed=args.seed,
        check=getattr(args, 'check', None),
        log_level=args.log_level,
        all_cells=getattr(args, 'all_cells', False),
        direct=getattr(args, 'direct', False),
        mu=(getattr(args, 'mu1', None), getattr(args, 'mu2', None), getattr(args, 'mu3', None)),
        r=getattr(args, 'r', None),
        form=getattr(args, 'form', 'eta'),
        rmax=getattr(args, 'rmax', 14),
    )
    return config


def _emit(config: RunConfig, text: str):
    if config.out:
        with open(config.out, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        logger.info(f"wrote {config.out}")
    else:
        sys.stdout.write(text)


def _record_output(config: RunConfig, record: dict) -> str:
    if config.format == 'json':
        return dump_record(record) + '\n'
    return to_csv(['value_re', 'value_im', 'error_estimate'],
                  [[record['value_re'], record['value_im'], record['error_estimate']]])


def _table_cells(config: RunConfig) -> List[Tuple[float, float]]:
    """Explicit --r1/--r2 lists (an empty list gives an empty grid), else --all, else the reference cells."""
    if config.r1 is not None or config.r2 is not None:
        r1_values = TABLE_GRID['r1'] if config.r1 is None else config.r1
        r2_values = TABLE_GRID['r2'] if config.r2 is None else config.r2
        return list(itertools.product(r1_values, r2_values))
    if config.all_cells:
        return list(itertools.product(TABLE_GRID['r1'], TABLE_GRID['r2']))
    reference = load_reference_table(config.check or TABLE_REFERENCE_FILE)
    return [(row['r1'], row['r2']) for row in reference]


def cmd_table(config: RunConfig) -> int:
    cells = _table_cells(config)
    results = triple_form_grid(cells, config.M, config.tol, config.threads)

    if config.format == 'json':
        _emit(config, json.dumps([asdict(c) for c in results], sort_keys=True) + '\n')
    else:
        rows = []
        for cell in results:
            if cell.status == 'ok':
                rows.append([cell.r1, cell.r2, cell.value, cell.tail_estimate, cell.seconds])
            else:
                rows.append([cell.r1, cell.r2, f"{cell.status} ({cell.reason})", '', cell.seconds])
        _emit(config, to_csv(['r1', 'r2', 'value', 'tail_estimate', 'seconds'], rows))

    status = EXIT_OK
    if any(cell.status == 'fail' for cell in results):
        status = EXIT_NUMERICAL
    if config.check:
        computed = {(c.r1, c.r2): c for c in results}
        for ref in load_reference_table(config.check):
            cell = computed.get((ref['r1'], ref['r2']))
            if cell is None or cell.status != 'ok':
                continue
            rel = abs(cell.value - ref['value']) / abs(ref['value'])
            if rel > ref['rel_tol']:
                logger.error(f"cell ({ref['r1']}, {ref['r2']}): {cell.value:.9g} vs {ref['value']} (rel {rel:.2e})")
                status = EXIT_NUMERICAL
            else:
                logger.info(f"cell ({ref['r1']}, {ref['r2']}) within {ref['rel_tol']:g} (rel {rel:.2e})")
    return status


def cmd_tri(config: RunConfig) -> int:
    r1, r2 = config.r1[0], config.r2[0]
    wt = WeightTriple.for_table(r1, r2)
    f1, f2, f3 = table_forms(r1, r2, config.M)
    result = triple_form_series(wt, f1, f2, f3, config.tol, config.threads)
    extra = {'M1': result.M1, 'M2': result.M2, 'M3': result.M3, 'nodes': result.nodes,
             'bare_sum': result.bare_sum}
    if config.direct:
        direct = triple_form_direct(wt, f1, f2, f3, max(config.tol, 1e-6))
        extra['direct_re'] = direct.real
        extra['direct_im'] = direct.imag
        extra['relative_gap'] = abs(direct - result.value) / max(abs(result.value), 1e-6)
    params = {'r1': r1, 'r2': r2, 'r3': wt.r3, 'M': config.M, 'tol': config.tol}
    record = complex_record(params, result.value, result.tail_estimate + result.quadrature_change, **extra)
    _emit(config, _record_output(config, record))
    return EXIT_OK


def cmd_psi(config: RunConfig) -> int:
    r1, r2 = config.r1[0], config.r2[0]
    mu1, mu2, mu3 = config.mu
    psi, change = psi_tilde_with_error(r1, r2, mu1, mu2, mu3, config.tol)
    value = 1j * psi / (2.0 * math.pi)
    params = {'r1': r1, 'r2': r2, 'mu1': mu1, 'mu2': mu2, 'mu3': mu3, 'tol': config.tol}
    _emit(config, _record_output(config, complex_record(params, value, change / (2.0 * math.pi))))
    return EXIT_OK


def cmd_haberland(config: RunConfig) -> int:
    f = eta_power_expansion(config.r, config.M)
    tol = max(config.tol, 1e-9)
    sides = haberland_identity(f, tol)
    params = {'r': config.r, 'M': config.M, 'tol': tol}
    record = complex_record(params, sides['lhs'], tol,
                            petersson_re=sides['petersson'].real, petersson_im=sides['petersson'].imag,
                            relative_residual=sides['relative_residual'])
    _emit(config, _record_output(config, record))
    return EXIT_OK


def cmd_coeffs(config: RunConfig) -> int:
    if config.form == 'e4':
        f = e4_expansion(config.M)
    elif config.form == 'f3':
        f = table_forms(config.r1[0], config.r2[0], config.M)[2]
    else:
        f = eta_power_expansion(config.r, config.M)
    rows = coefficient_table(f)
    if config.format == 'json':
        _emit(config, json.dumps([{'m': m, 'mu': mu, 'a': a} for m, mu, a in rows]) + '\n')
    else:
        _emit(config, to_csv(['m', 'mu', 'a'], rows))
    return EXIT_OK


def cmd_coinv(config: RunConfig) -> int:
    rows = []
    for r in range(2, config.rmax + 1):
        for p in valid_parameters(r):
            report = poly_coinvariant_report(r, p)
            logger.info(f"r={r}, p={p}: dim {report.dim}, threshold margin {report.margin:.2e}")
            rows.append([r, p, report.dim])
    if config.format == 'json':
        _emit(config, json.dumps([{'r': r, 'p': p, 'dim': d} for r, p, d in rows]) + '\n')
    else:
        _emit(config, to_csv(['r', 'p', 'dim'], rows))
    return EXIT_OK


def cmd_selftest(config: RunConfig) -> int:
    results = run_selftest(config.seed)
    lines = []
    for result in results:
        mark = "✅" if result['passed'] else "❌"
        lines.append(f"{mark} {result['name']}: {result['detail']}")
    passed = sum(r['passed'] for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    _emit(config, '\n'.join(lines) + '\n')
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


COMMANDS = {
    'table': cmd_table,
    'tri': cmd_tri,
    'psi': cmd_psi,
    'haberland': cmd_haberland,
    'coeffs': cmd_coeffs,
    'coinv': cmd_coinv,
    'selftest': cmd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except SystemExit as e:
        # argparse reports usage errors itself
        return EXIT_USAGE if e.code else EXIT_OK

    setup_logging(config.log_level)
    try:
        config.validate()
    except UsageError as e:
        logger.error(str(e))
        sys.stderr.write(f"modcup: error: {e}\n")
        return EXIT_USAGE

    try:
        return COMMANDS[config.command](config)
    except ModcupError as e:
        logger.error(f"{config.command} failed: {e}")
        sys.stdout.write(json.dumps(create_error_response(str(e), e.code), sort_keys=True) + '\n')
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
