"""
Box-Free Hypergraph Experiments - Command Line
==============================================
Subcommands:
    table      comparison of lower-bound exponents, d_min..d_max
    construct  one instance of the random multilinear construction
    trials     many instances (exact tensor-space sweep or seeded sampling)
    verify     re-check a construct dump offline
    trend      mean|B| / mean|E| across field sizes

Data goes to stdout (or --out); logging and progress bars go to stderr.

Exit codes:
    0  success
    1  usage (bad arguments, bad parameters, unreadable dump)
    2  enumeration budget exceeded
    3  verification failed

Usage:
    python cli.py table 2 22
    python cli.py construct --d 2 --r 1 --s 2 --p 3 --seed 1 --format json-lines --out run.jsonl
    python cli.py verify run.jsonl
    python cli.py trials --d 2 --r 1 --s 2 --p 2 --mode exact
    python cli.py trials --d 2 --r 1 --s 2 --p 5 --trials 1000 --seed 0 --workers 4
    python cli.py trend --d 2 --r 1 --s 2 --fields 3,5,7,9 --trials 500
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import pandas as pd

from bounds import ROUNDING_MODES, TABLE_FORMATS, comparison_table, render_table
from construct import (DEFAULT_DELTA, DEFAULT_MAX_BOXES, DEFAULT_MAX_TENSOR_SPACE, DEFAULT_MAX_TUPLES, MODES,
                       Budget, Instance, Params, edge_records, edges_from_records, find_box,
                       run_instance, run_trials, sample_forms, trend, trial_rng)
from errors import (BudgetExceededError, DegenerateInputError, DimensionMismatchError,
                    FieldError, ParameterError, UsageError, VerificationError)
from gf import split_prime_power
from tensor import form_from_record, form_to_record

logger = logging.getLogger(__name__)

VERSION = "0.1.0"
RECORD_SCHEMA_VERSION = 1
MAX_TABLE_D = 64

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_VERIFICATION = 3

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    d: int = 2
    r: int = 1
    s: int = 2
    p: int = 3
    k: int = 1
    trials: int = 100
    seed: int = 0
    mode: str = 'sample'
    out: Optional[str] = None
    fmt: str = 'text'
    budget: Budget = Budget()
    delta: float = DEFAULT_DELTA
    cross_check: bool = False
    workers: int = 1

    @property
    def params(self) -> Params:
        return Params(d=self.d, r=self.r, s=self.s, p=self.p, k=self.k)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        budget = budget_from_args(args)
        fields = {name: getattr(args, name) for name in
                  ('d', 'r', 's', 'p', 'k', 'trials', 'seed', 'mode', 'delta', 'cross_check', 'workers')
                  if hasattr(args, name)}
        return cls(command=args.command, out=args.out, fmt=args.format, budget=budget, **fields)


def budget_from_args(args: argparse.Namespace) -> Budget:
    return Budget(max_tuples=args.budget_tuples, max_tensor_space=args.budget_tensor_space,
                  max_boxes=args.budget_boxes)


# ============================================================================
# OUTPUT HELPERS
# ============================================================================

def format_exact(value: Fraction) -> str:
    """
    Finite decimal when the denominator is 2^a 5^b, else 'num/den'

    Example:
        >>> format_exact(Fraction(9, 2))
        '4.5'
        >>> format_exact(Fraction(8, 3))
        '8/3'
    """
    value = Fraction(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = abs(value) * 10 ** digits
    whole, frac = divmod(int(scaled), 10 ** digits)
    sign = '-' if value < 0 else ''
    return f"{sign}{whole}.{frac:0{digits}d}" if digits else f"{sign}{whole}"


def _plain(value):
    if isinstance(value, Fraction):
        return format_exact(value)
    if hasattr(value, 'item'):
        return value.item()
    return value


def _text_value(value) -> str:
    value = _plain(value)
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return ''
    return str(value)


def _json_line(record: Dict) -> str:
    return json.dumps({key: _plain(value) for key, value in record.items()}) + '\n'


def _text_block(record: Dict) -> str:
    return ''.join(f"{key}: {_text_value(value)}\n" for key, value in record.items() if key not in ('record', 'schema'))


def _frame_block(frame: pd.DataFrame, fmt: str) -> str:
    if fmt == 'csv':
        return frame.to_csv(index=False, lineterminator='\n')
    if fmt == 'json-lines':
        return frame.to_json(orient='records', lines=True).rstrip('\n') + '\n' if len(frame) else ''
    return frame.to_string(index=False) + '\n'


def _summary_frame(record: Dict) -> pd.DataFrame:
    return pd.DataFrame([{key: _plain(value) for key, value in record.items()}])


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _run_record(config: RunConfig) -> Dict:
    return {
        'record': 'run',
        'schema': RECORD_SCHEMA_VERSION,
        'version': VERSION,
        'command': config.command,
        'd': config.d, 'r': config.r, 's': config.s, 'p': config.p, 'k': config.k,
        'seed': config.seed,
        'delta': config.delta,
        'cross_check': config.cross_check,
    }


def _progress() -> bool:
    return sys.stderr.isatty()


def _flag_regime(params: Params) -> None:
    if params.theorem_regime:
        logger.info(f"{params}: inside the theorem regime d(s-1) < (2^d-1)r")
    else:
        logger.warning(f"{params}: outside the theorem regime d(s-1) < (2^d-1)r; running anyway")


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_table(d_min: int, d_max: int, fmt: str = 'text', rounding: str = 'down',
              r_max: int = 1, out: Optional[str] = None) -> int:
    if not 2 <= d_min <= d_max <= MAX_TABLE_D:
        raise UsageError(f"need 2 <= D_MIN <= D_MAX <= {MAX_TABLE_D}, got {d_min} {d_max}")
    rows = comparison_table(d_min, d_max, r_max)
    _write(render_table(rows, fmt, rounding), out)
    return EXIT_OK


def construct_summary(instance: Instance) -> Dict:
    params = instance.params
    sizes = instance.sizes()
    record = {'record': 'summary', 'schema': RECORD_SCHEMA_VERSION,
              'n': params.n, 'q': params.q,
              'target_exponent': params.target_exponent,
              'theorem_regime': params.theorem_regime}
    record.update(sizes)
    record.update({
        'box_free': instance.box_free,
        'good': instance.good,
        'leading_constant': params.leading_constant,
        'target_edges': params.target_edges,
        'kept_to_target': sizes['kept'] / params.target_edges,
    })
    return record


def cmd_construct(config: RunConfig) -> int:
    params = config.params
    _flag_regime(params)
    logger.info("=" * 60)
    logger.info(f"CONSTRUCT: {params} seed={config.seed}")
    logger.info("=" * 60)

    forms = sample_forms(params, trial_rng(config.seed, 0))
    instance = run_instance(params, forms, config.budget, config.cross_check, config.delta)
    summary = construct_summary(instance)
    logger.info(f"|E|={summary['edges']} |F|={summary['boxes']} |L|={summary['line_tuples']} "
                f"|B|={summary['bad']} |E'|={summary['kept']} box-free={instance.box_free}")

    if config.fmt == 'json-lines':
        parts = [_json_line(_run_record(config))]
        parts += [_json_line(form_to_record(T, index=i)) for i, T in enumerate(forms)]
        parts.append(_json_line(summary))
        parts += [_json_line({'record': 'edge', 'vertices': row}) for row in edge_records(instance.kept).tolist()]
        text = ''.join(parts)
    elif config.fmt == 'csv':
        text = _frame_block(_summary_frame(summary), 'csv')
    else:
        text = _text_block(summary)
    _write(text, config.out)
    return EXIT_OK


def _read_dump(path: str) -> List[Dict]:
    try:
        with open(path, encoding='utf-8') as f:
            return [json.loads(line) for line in f if line.strip()]
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not json-lines: {e}") from e


def _dump_int(record: Dict, key: str, path: str) -> int:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise UsageError(f"{path}: {record.get('record')} record field {key!r} must be an integer, got {value!r}")
    return value


def _dump_vertices(records: List[Dict], d: int, path: str) -> List[List[int]]:
    rows = []
    for record in records:
        row = record.get('vertices')
        if (not isinstance(row, list) or len(row) != d
                or any(isinstance(v, bool) or not isinstance(v, int) for v in row)):
            raise UsageError(f"{path}: edge record {row!r} is not {d} integer vertex ids")
        rows.append(row)
    return rows


def cmd_verify(path: str, budget: Budget, out: Optional[str] = None) -> int:
    """
    Rebuild the instance from the stored forms and compare it with the dump

    Raises:
        UsageError: If the dump is unreadable or incomplete
        VerificationError: If any size or the kept edge set differs, or a box is found
    """
    records = _read_dump(path)
    by_kind: Dict[str, List[Dict]] = {}
    for record in records:
        by_kind.setdefault(record.get('record'), []).append(record)
    if len(by_kind.get('run', [])) != 1 or len(by_kind.get('summary', [])) != 1:
        raise UsageError(f"{path}: expected one run record and one summary record")
    run, stored = by_kind['run'][0], by_kind['summary'][0]
    if run.get('schema') != RECORD_SCHEMA_VERSION:
        raise UsageError(f"{path}: unsupported schema {run.get('schema')}")

    params = Params(**{key: _dump_int(run, key, path) for key in ('d', 'r', 's', 'p', 'k')})
    forms = [form_from_record(record) for record in sorted(by_kind.get('form', []), key=lambda x: x.get('index', 0))]
    logger.info("=" * 60)
    logger.info(f"VERIFY: {path} ({params})")
    logger.info("=" * 60)

    instance = run_instance(params, forms, budget, run.get('cross_check', False), run.get('delta', DEFAULT_DELTA))
    mismatched = [key for key, value in instance.sizes().items() if stored.get(key) != value]
    if mismatched:
        raise VerificationError(f"{path}: recorded sizes differ from the rebuild: {mismatched}")

    rows = _dump_vertices(by_kind.get('edge', []), params.d, path)
    kept = edges_from_records(instance.kept.space, params.d, rows)
    if kept != instance.kept:
        raise VerificationError(f"{path}: stored edges differ from the rebuilt E'")
    witness = find_box(kept)
    if witness is not None:
        raise VerificationError(f"{path}: stored edge set contains a box {witness.pairs}")

    _write(f"verified: {path} ({len(kept)} edges, box-free)\n", out)
    return EXIT_OK


def cmd_trials(config: RunConfig) -> int:
    if config.mode == 'sample' and config.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {config.trials}")
    params = config.params
    _flag_regime(params)
    stats = run_trials(params, config.trials, config.seed, config.mode, config.budget,
                       config.workers, config.cross_check, config.delta, progress=_progress())
    summary = stats.summary()

    if config.fmt == 'json-lines':
        records = stats.records.copy()
        records.insert(0, 'record', 'trial')
        text = _json_line(_run_record(config)) + _frame_block(records, 'json-lines') + _json_line(summary)
    elif config.fmt == 'csv':
        text = _frame_block(stats.records, 'csv') + '\n' + _frame_block(_summary_frame(summary), 'csv')
    else:
        text = _frame_block(stats.records, 'text') + '\n' + _text_block(summary)
    _write(text, config.out)
    return EXIT_OK


def parse_fields(text: str) -> List[tuple]:
    """'3,5,7,9' -> [(3, 1), (5, 1), (7, 1), (3, 2)]"""
    try:
        sizes = [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise UsageError(f"--fields must be comma-separated integers, got {text!r}") from e
    if not sizes:
        raise UsageError("--fields is empty")
    return [split_prime_power(q) for q in sizes]


def cmd_trend(config: RunConfig, fields: str) -> int:
    if config.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {config.trials}")
    _flag_regime(config.params)
    frame = trend(config.d, config.r, config.s, parse_fields(fields), config.trials,
                  config.seed, config.budget, config.workers, progress=_progress())
    if not frame['decreasing'].all():
        logger.warning("mean|B| / mean|E| is not decreasing across the given fields")
    _write(_frame_block(frame, config.fmt), config.out)
    return EXIT_OK


# ============================================================================
# ENTRY POINT
# ============================================================================

def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument('--verbose', action='store_true', help='debug logging')
    common.add_argument('--quiet', action='store_true', help='warnings and errors only')
    common.add_argument('--budget-tuples', type=int, default=DEFAULT_MAX_TUPLES,
                        help='max (q^s)^d tuples to enumerate (default: %(default)s)')
    common.add_argument('--budget-tensor-space', type=int, default=DEFAULT_MAX_TENSOR_SPACE,
                        help='max q^(r s^d) forms for exact mode (default: %(default)s)')
    common.add_argument('--budget-boxes', type=int, default=DEFAULT_MAX_BOXES,
                        help='max boxes (expected and found) per instance (default: %(default)s)')
    common.add_argument('--out', default=None, help='write data here instead of stdout')
    common.add_argument('--format', default='text', choices=TABLE_FORMATS)

    instance = _Parser(add_help=False)
    instance.add_argument('--d', type=int, default=2, help='uniformity (default: 2)')
    instance.add_argument('--r', type=int, default=1, help='number of forms (default: 1)')
    instance.add_argument('--s', type=int, default=2, help='dimension of V (default: 2)')
    instance.add_argument('--p', type=int, default=3, help='field characteristic (default: 3)')
    instance.add_argument('--k', type=int, default=1, help='field degree, q = p^k (default: 1)')
    instance.add_argument('--seed', type=int, default=0)
    instance.add_argument('--delta', type=float, default=DEFAULT_DELTA,
                          help="good instance: |E'| >= (1 - delta) q^(ds - r)")
    instance.add_argument('--cross-check', action='store_true',
                          help='rebuild F from L and B by direct search on every instance')
    instance.add_argument('--workers', type=int, default=1, help='worker processes for sampled trials')

    parser = _Parser(prog='cli.py', description='Random multilinear box-free hypergraph experiments')
    parser.add_argument('--version', action='version', version=f'%(prog)s {VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    table = sub.add_parser('table', parents=[common], help='bounds comparison table')
    table.add_argument('d_min', type=int)
    table.add_argument('d_max', type=int)
    table.add_argument('--rounding', default='down', choices=ROUNDING_MODES)
    table.add_argument('--r-max', type=int, default=1, help='search r up to this value')

    sub.add_parser('construct', parents=[common, instance], help='one instance')

    trials = sub.add_parser('trials', parents=[common, instance], help='many instances')
    trials.add_argument('--trials', type=int, default=100)
    trials.add_argument('--mode', default='sample', choices=MODES)

    verify = sub.add_parser('verify', parents=[common], help='re-check a construct dump')
    verify.add_argument('path')

    trend_parser = sub.add_parser('trend', parents=[common, instance], help='|B|/|E| across q')
    trend_parser.add_argument('--fields', default='3,5,7,9', help='comma-separated prime powers')
    trend_parser.add_argument('--trials', type=int, default=500)
    return parser


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(args: argparse.Namespace) -> int:
    budget = budget_from_args(args)
    if args.command == 'table':
        return cmd_table(args.d_min, args.d_max, args.format, args.rounding, args.r_max, args.out)
    if args.command == 'verify':
        return cmd_verify(args.path, budget, args.out)
    config = RunConfig.from_args(args)
    if args.command == 'construct':
        return cmd_construct(config)
    if args.command == 'trials':
        return cmd_trials(config)
    return cmd_trend(config, args.fields)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command, map errors to exit codes"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        setup_logging()
        logger.error(f"usage: {e}")
        return EXIT_USAGE

    setup_logging(args.verbose, args.quiet)
    try:
        return run(args)
    except (UsageError, ParameterError, FieldError, DegenerateInputError, DimensionMismatchError) as e:
        logger.error(f"usage: {e}")
        return EXIT_USAGE
    except BudgetExceededError as e:
        logger.error(f"budget: {e}")
        return EXIT_BUDGET
    except VerificationError as e:
        logger.error(f"verification failed: {e}")
        return EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
