"""
Lower-Bound Exponents for the Box Problem
=========================================
Every bound is reported as alpha, meaning ex_d(n, K_{2,...,2}) = Omega(n^(d - 1/alpha))
(for the upper-bound column, O(n^(d - 1/alpha))). All values are exact
Fractions; decimals only appear when a table is rendered.

Columns:
    upper     2^(d-1)                     Erdos upper bound
    deletion  (2^d - 1)/d                 random hypergraph + deletion
    GRS       s(2^d - 1)/(sd - 1)         smallest s with sd = 1 mod 2^d - 1, if any
    new       s/r                         best (r, s) with d(s-1) < (2^d - 1) r

Usage:
    from bounds import comparison_table, render_table
    print(render_table(comparison_table(2, 22)))
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from errors import ParameterError

logger = logging.getLogger(__name__)

ROUNDING_MODES = ('down', 'half-up')
TABLE_FORMATS = ('text', 'csv', 'json-lines')


@dataclass(frozen=True)
class BoundsRow:
    d: int
    alpha_upper: Fraction
    alpha_deletion: Fraction
    alpha_grs: Optional[Fraction]
    grs_s: Optional[int]
    alpha_new: Fraction
    new_r: int
    new_s: int


def _check_d(d: int) -> None:
    if not isinstance(d, int) or d < 2:
        raise ParameterError(f"uniformity d must be an integer >= 2, got {d}")


def upper_alpha(d: int) -> Fraction:
    _check_d(d)
    return Fraction(2 ** (d - 1))


def deletion_alpha(d: int) -> Fraction:
    """(2^d - 1)/d"""
    _check_d(d)
    return Fraction(2 ** d - 1, d)


def grs_alpha(d: int) -> Optional[Tuple[int, Fraction]]:
    """
    Smallest s with (sd - 1)/(2^d - 1) integral, and alpha = s(2^d - 1)/(sd - 1)

    Returns:
        Optional[Tuple[int, Fraction]]: (s, alpha), or None when gcd(d, 2^d - 1) > 1

    Example:
        >>> grs_alpha(3)
        (5, Fraction(5, 2))
        >>> grs_alpha(6) is None
        True
    """
    _check_d(d)
    m = 2 ** d - 1
    if gcd(d, m) != 1:
        return None
    s = pow(d, -1, m)
    return s, Fraction(s * m, s * d - 1)


def check_params(d: int, r: int, s: int) -> bool:
    """Theorem regime: d(s - 1) < (2^d - 1) r, in exact integer arithmetic"""
    _check_d(d)
    if r < 1 or s < 1:
        raise ParameterError(f"r and s must be >= 1, got r={r}, s={s}")
    return d * (s - 1) < (2 ** d - 1) * r


def theorem_alpha(r: int, s: int) -> Fraction:
    return Fraction(s, r)


def new_alpha(d: int, r_max: int = 1) -> Tuple[int, int, Fraction]:
    """
    The admitted (r, s) maximizing s/r over 1 <= r <= r_max, ties to smaller r

    For each r the largest admitted s is floor(((2^d - 1) r - 1)/d) + 1.

    Example:
        >>> new_alpha(3)
        (1, 3, Fraction(3, 1))
    """
    _check_d(d)
    if r_max < 1:
        raise ParameterError(f"r_max must be >= 1, got {r_max}")
    m = 2 ** d - 1
    best = None
    for r in range(1, r_max + 1):
        s = (m * r - 1) // d + 1
        alpha = theorem_alpha(r, s)
        if best is None or alpha > best[2]:
            best = (r, s, alpha)
    return best


def larger_r_helps(d: int, r_max: int) -> bool:
    """True iff some 1 < r <= r_max gives a strictly larger alpha than r = 1"""
    return new_alpha(d, r_max)[0] > 1


def bounds_row(d: int, r_max: int = 1) -> BoundsRow:
    grs = grs_alpha(d)
    r, s, alpha = new_alpha(d, r_max)
    return BoundsRow(
        d=d,
        alpha_upper=upper_alpha(d),
        alpha_deletion=deletion_alpha(d),
        alpha_grs=grs[1] if grs else None,
        grs_s=grs[0] if grs else None,
        alpha_new=alpha,
        new_r=r,
        new_s=s,
    )


def comparison_table(d_min: int, d_max: int, r_max: int = 1) -> List[BoundsRow]:
    """One BoundsRow per d in [d_min, d_max]"""
    if not (isinstance(d_min, int) and isinstance(d_max, int) and 2 <= d_min <= d_max):
        raise ParameterError(f"need 2 <= d_min <= d_max, got {d_min}, {d_max}")
    rows = [bounds_row(d, r_max) for d in range(d_min, d_max + 1)]
    if r_max > 1:
        for row in rows:
            if row.new_r > 1:
                logger.info(f"d={row.d}: r={row.new_r} beats r=1 (alpha {row.alpha_new})")
    return rows


# ============================================================================
# RENDERING
# ============================================================================

def format_alpha(value: Optional[Fraction], rounding: str = 'down') -> str:
    """
    Two-decimal rendering of a positive rational

    'down' truncates, which is how every cell of the published d = 2..22
    table reads; 'half-up' rounds.

    Example:
        >>> format_alpha(Fraction(109 * 127, 762))
        '18.16'
        >>> format_alpha(Fraction(109 * 127, 762), 'half-up')
        '18.17'
    """
    if value is None:
        return ''
    if rounding not in ROUNDING_MODES:
        raise ParameterError(f"rounding must be one of {ROUNDING_MODES}, got {rounding!r}")
    scaled = value * 100
    if rounding == 'half-up':
        scaled += Fraction(1, 2)
    cents = scaled.numerator // scaled.denominator
    return f"{cents // 100}.{cents % 100:02d}"


def table_frame(rows: Sequence[BoundsRow], rounding: str = 'down') -> pd.DataFrame:
    """Decimal cells next to exact-rational side columns"""
    return pd.DataFrame([{
        'd': row.d,
        'deletion': format_alpha(row.alpha_deletion, rounding),
        'grs': format_alpha(row.alpha_grs, rounding),
        'new': format_alpha(row.alpha_new, rounding),
        'upper': format_alpha(row.alpha_upper, rounding),
        'deletion_exact': str(row.alpha_deletion),
        'grs_exact': str(row.alpha_grs) if row.alpha_grs is not None else '',
        'grs_s': row.grs_s if row.grs_s is not None else '',
        'new_exact': str(row.alpha_new),
        'new_r': row.new_r,
        'new_s': row.new_s,
    } for row in rows])


def render_table(rows: Sequence[BoundsRow], fmt: str = 'text', rounding: str = 'down') -> str:
    """
    Render rows as aligned text (d, deletion, GRS, new; no header), csv or json-lines

    Example:
        >>> render_table(comparison_table(2, 2))
        '2  1.50  2.00  2.00\\n'
    """
    if fmt not in TABLE_FORMATS:
        raise ParameterError(f"format must be one of {TABLE_FORMATS}, got {fmt!r}")
    frame = table_frame(rows, rounding)
    if fmt == 'csv':
        return frame.to_csv(index=False, lineterminator='\n')
    if fmt == 'json-lines':
        return frame.to_json(orient='records', lines=True).rstrip('\n') + '\n'

    cells = [[str(row['d']), row['deletion'], row['grs'], row['new']] for _, row in frame.iterrows()]
    widths = [max(len(line[i]) for line in cells) for i in range(4)]
    lines = ['  '.join(cell.rjust(width) for cell, width in zip(line, widths)) for line in cells]
    return '\n'.join(lines) + '\n'
