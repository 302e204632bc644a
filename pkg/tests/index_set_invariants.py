"""Structural properties of the index set, shared by unit and acceptance tests."""

from cmnd_moments.core import MultiIndex
from cmnd_moments.index_set import bounds, enumerate_index_set


def flat(a):
    return [v for row in a for v in row]


def check_bounds_along(alpha, a):
    """Every cell of ``a`` lies in its own bounds, and the bounds satisfy 0 <= l <= L."""
    prefix = flat(a)
    p = alpha.p
    for i in range(p):
        for j in range(p):
            lo, hi = bounds(alpha, prefix, i, j, validate=False)
            assert 0 <= lo <= hi, (alpha, a, i, j, lo, hi)
            assert lo <= a[i][j] <= hi, (alpha, a, i, j, lo, hi)


def check_zero_rows_and_columns(alpha, a):
    for r, x in enumerate(alpha.n):
        if x == 0:
            assert not any(a[r]), (alpha, a, r)
    for s, x in enumerate(alpha.m):
        if x == 0:
            assert not any(row[s] for row in a), (alpha, a, s)


def check_forced_entries(alpha, a):
    p = alpha.p
    q = p - 1
    for i in range(p):
        assert a[i][q] == alpha.n[i] - sum(a[i][k] for k in range(q))
    for j in range(p):
        assert a[q][j] == alpha.m[j] - sum(a[h][j] for h in range(q))
    inner = sum(a[h][k] for h in range(q) for k in range(q))
    assert a[q][q] == alpha.n[q] - sum(alpha.m[:q]) + inner


def check_endpoint_propagation(alpha, a):
    """Saturating a row or column at its upper bound zeroes the rest of it;
    sitting at an active lower bound saturates the remaining rows/columns."""
    p = alpha.p
    prefix = flat(a)
    for i in range(p):
        for j in range(p):
            lo, hi = bounds(alpha, prefix, i, j, validate=False)
            col_left = alpha.m[j] - sum(a[h][j] for h in range(i))
            row_left = alpha.n[i] - sum(a[i][k] for k in range(j))
            if a[i][j] == hi == col_left:
                assert all(a[q][j] == 0 for q in range(i + 1, p))
            if a[i][j] == hi == row_left:
                assert all(a[i][t] == 0 for t in range(j + 1, p))
            expr = (
                sum(alpha.n[: i + 1])
                - sum(alpha.m[j + 1 :])
                - sum(a[h][k] for h in range(i + 1) for k in range(j + 1) if (h, k) != (i, j))
            )
            if a[i][j] == lo == expr:
                for t in range(j + 1, p):
                    assert a[i][t] == alpha.m[t] - sum(a[h][t] for h in range(i))
                for q in range(i + 1, p):
                    assert a[q][j] == alpha.n[q] - sum(a[q][k] for k in range(j))
                    for t in range(j + 1, p):
                        assert a[q][t] == 0


def check_shifted_sets(alpha, members):
    """Raising I(alpha - beta_rs) at (r, s) lands inside I(alpha) and misses
    exactly the members with a zero at (r, s)."""
    members = set(members)
    p = alpha.p
    for r in range(p):
        for s in range(p):
            if alpha.n[r] == 0 or alpha.m[s] == 0:
                assert all(a[r][s] == 0 for a in members)
                continue
            lowered = alpha.minus(r, s)
            shifted = set()
            for a in enumerate_index_set(lowered):
                b = [list(row) for row in a]
                b[r][s] += 1
                shifted.add(tuple(tuple(row) for row in b))
            assert shifted <= members, (alpha, r, s)
            assert all(b[r][s] == 0 for b in members - shifted), (alpha, r, s)


def check_all(alpha: MultiIndex, members):
    for a in members:
        check_bounds_along(alpha, a)
        check_zero_rows_and_columns(alpha, a)
        check_forced_entries(alpha, a)
        check_endpoint_propagation(alpha, a)
    check_shifted_sets(alpha, members)
