"""
Exact sparse linear algebra over the rationals.

Systems are given row-wise as `{unknown: {unknown: coefficient}}` together with a right-hand side
`{unknown: constant}`. Missing entries are zero.
"""

from fractions import Fraction
from typing import Hashable
from typing import Mapping
from typing import TypeVar

K = TypeVar("K", bound=Hashable)


def solve(
    rows: Mapping[K, Mapping[K, Fraction]],
    rhs: Mapping[K, Fraction],
) -> dict[K, Fraction]:
    """
    Solve a square linear system by Gauss-Jordan elimination over `Fraction`.

    Rows and columns are both indexed by the unknowns. The diagonal entry of a row is preferred as
    pivot; when it has vanished, any other remaining row with a non-zero entry in the pivot column
    is used instead.

    Args:
        rows: The coefficient matrix, one sparse row per unknown.
        rhs: The constant vector.

    Returns:
        The unique solution, keyed by unknown.

    Raises:
        ZeroDivisionError: If the system is singular.
    """
    unknowns = list(rows)
    matrix: dict[K, dict[K, Fraction]] = {
        key: {col: coef for col, coef in row.items() if coef != 0} for key, row in rows.items()
    }
    constants: dict[K, Fraction] = {key: Fraction(rhs.get(key, 0)) for key in unknowns}

    # column -> rows with a non-zero entry in that column
    occurrences: dict[K, set[K]] = {key: set() for key in unknowns}
    for key, row in matrix.items():
        for col in row:
            occurrences[col].add(key)

    pivot_row_of: dict[K, K] = {}
    remaining = set(unknowns)

    for col in unknowns:
        candidates = occurrences[col] & remaining
        if not candidates:
            raise ZeroDivisionError(f"Singular system: no pivot for unknown {col!r}")
        pivot = col if col in candidates else min(candidates, key=lambda k: len(matrix[k]))
        remaining.discard(pivot)
        pivot_row_of[col] = pivot

        prow = matrix[pivot]
        factor = prow[col]
        if factor != 1:
            for c in prow:
                prow[c] /= factor
            constants[pivot] /= factor

        for other in list(occurrences[col]):
            if other == pivot:
                continue
            orow = matrix[other]
            scale = orow[col]
            for c, coef in prow.items():
                updated = orow.get(c, Fraction(0)) - scale * coef
                if updated == 0:
                    if c in orow:
                        del orow[c]
                        occurrences[c].discard(other)
                else:
                    if c not in orow:
                        occurrences[c].add(other)
                    orow[c] = updated
            constants[other] -= scale * constants[pivot]

    return {col: constants[pivot_row_of[col]] for col in unknowns}
