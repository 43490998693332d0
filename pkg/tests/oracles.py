"""Slow, independent reference implementations used to check the package.

Nothing here imports secvault: field arithmetic is shift-and-add with
explicit reduction, and linear algebra is textbook elimination on Python
lists.
"""

from itertools import combinations, product


def gf_mul(a, b, width, poly):
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> width & 1:
            a ^= poly
    return r


def gf_pow(a, e, width, poly):
    r = 1
    for _ in range(e):
        r = gf_mul(r, a, width, poly)
    return r


def gf_inv(a, width, poly):
    if a == 0:
        raise ZeroDivisionError
    # a^(q-2) by Fermat
    r, base, e = 1, a, (1 << width) - 2
    while e:
        if e & 1:
            r = gf_mul(r, base, width, poly)
        base = gf_mul(base, base, width, poly)
        e >>= 1
    return r


def smallest_irreducible(width):
    """Brute force: no factor of degree 1..width//2 divides the polynomial."""
    def pmod(a, m):
        dm = m.bit_length() - 1
        while a and a.bit_length() - 1 >= dm:
            a ^= m << (a.bit_length() - 1 - dm)
        return a
    for poly in range(1 << width, 1 << (width + 1)):
        if all(pmod(poly, d) for d in range(2, 1 << (width // 2 + 1))):
            return poly


def rank(rows, width, poly):
    m = [list(r) for r in rows]
    rk, cols = 0, len(m[0]) if m else 0
    for c in range(cols):
        piv = next((i for i in range(rk, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[rk], m[piv] = m[piv], m[rk]
        inv = gf_inv(m[rk][c], width, poly)
        m[rk] = [gf_mul(v, inv, width, poly) for v in m[rk]]
        for i in range(len(m)):
            if i != rk and m[i][c]:
                f = m[i][c]
                m[i] = [v ^ gf_mul(f, w, width, poly) for v, w in zip(m[i], m[rk])]
        rk += 1
    return rk


def solve(a, y, width, poly):
    """Solve square ``a x = y``; returns None when singular."""
    n = len(a)
    m = [list(r) + [y[i]] for i, r in enumerate(a)]
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c]), None)
        if piv is None:
            return None
        m[c], m[piv] = m[piv], m[c]
        inv = gf_inv(m[c][c], width, poly)
        m[c] = [gf_mul(v, inv, width, poly) for v in m[c]]
        for i in range(n):
            if i != c and m[i][c]:
                f = m[i][c]
                m[i] = [v ^ gf_mul(f, w, width, poly) for v, w in zip(m[i], m[c])]
    return [m[i][n] for i in range(n)]


def mat_vec(a, x, width, poly):
    out = []
    for row in a:
        s = 0
        for v, w in zip(row, x):
            s ^= gf_mul(v, w, width, poly)
        out.append(s)
    return out


def cauchy(h, f, width, poly):
    return [[gf_inv(hi ^ fj, width, poly) for fj in f] for hi in h]


def spark_ok(rows, gamma, width, poly):
    """Every ``2*gamma`` columns of ``rows`` are linearly independent."""
    k = len(rows[0])
    for cols in combinations(range(k), 2 * gamma):
        sub = [[r[c] for c in cols] for r in rows]
        if rank(sub, width, poly) < 2 * gamma:
            return False
    return True


def sparse_solutions(rows, y, gamma, width, poly):
    """All vectors of at most ``gamma`` nonzeros with ``rows @ z = y`` (least-squares free).

    Enumerates supports and solves the overdetermined system on each by
    picking ``gamma`` independent rows and checking the rest.
    """
    k = len(rows[0])
    found = set()
    for S in combinations(range(k), gamma):
        sub = [[r[c] for c in S] for r in rows]
        for pick in combinations(range(len(rows)), gamma):
            vals = solve([sub[i] for i in pick], [y[i] for i in pick], width, poly)
            if vals is None:
                continue
            z = [0] * k
            for c, v in zip(S, vals):
                z[c] = v
            if mat_vec(rows, z, width, poly) == list(y):
                found.add(tuple(z))
            break
    return found


def brute_sparse(rows, y, gamma, width, poly):
    """Exhaustive search over every <= gamma-sparse vector (tiny fields only)."""
    k = len(rows[0])
    q = 1 << width
    found = set()
    for g in range(gamma + 1):
        for S in combinations(range(k), g):
            for vals in product(range(1, q), repeat=g):
                z = [0] * k
                for c, v in zip(S, vals):
                    z[c] = v
                if mat_vec(rows, z, width, poly) == list(y):
                    found.add(tuple(z))
    return found


def binom_tail(n, need, p):
    """P(fewer than ``need`` of ``n`` independent nodes alive), by pattern enumeration."""
    total = 0.0
    for alive in product((0, 1), repeat=n):
        if sum(alive) < need:
            f = n - sum(alive)
            total += p ** f * (1 - p) ** (n - f)
    return total
