#!/usr/bin/env python3
"""Generate nested Gauss-Patterson nodes/weights on [-1, 1] up to level 8.

Each level extends the previous node set X (N points) by the N+1 roots of the
polynomial q of degree N+1 that is orthogonal to all polynomials of degree
<= N with respect to the weight prod(x - X) on [-1, 1]. Weights are those of
the interpolatory rule on the union. Everything is done in mpmath at high
precision and rounded to double only when emitting the header.

Usage: python3 tools/gen_patterson.py > src/patterson_table.inc
"""
import sys
import mpmath as mp

mp.mp.dps = 140
MAX_LEVEL = 8


def legendre_all(n, x):
    """P_0..P_n evaluated at x."""
    p = [mp.mpf(1), x]
    for k in range(1, n):
        p.append(((2 * k + 1) * x * p[k] - k * p[k - 1]) / (k + 1))
    return p[: n + 1]


def gauss_legendre(m):
    nodes, weights = [], []
    for i in range(1, m + 1):
        x = mp.cos(mp.pi * (i - mp.mpf(0.25)) / (m + mp.mpf(0.5)))
        for _ in range(100):
            p = legendre_all(m, x)
            dp = m * (x * p[m] - p[m - 1]) / (x * x - 1)
            dx = p[m] / dp
            x -= dx
            if abs(dx) < mp.mpf(10) ** (-mp.mp.dps + 10):
                break
        p = legendre_all(m, x)
        dp = m * (x * p[m] - p[m - 1]) / (x * x - 1)
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    return nodes, weights


def extend(nodes):
    n = len(nodes)
    deg = n + 1
    m = (3 * n + 4) // 2 + 2
    gx, gw = gauss_legendre(m)
    # M[j][k] = int pi(x) P_j(x) P_k(x) dx, j <= n, k <= n + 1
    rows = [[mp.mpf(0)] * (deg + 1) for _ in range(n + 1)]
    for x, w in zip(gx, gw):
        pix = mp.mpf(1)
        for t in nodes:
            pix *= x - t
        p = legendre_all(deg, x)
        s = w * pix
        for j in range(n + 1):
            sj = s * p[j]
            row = rows[j]
            for k in range(deg + 1):
                row[k] += sj * p[k]
    a_mat = mp.matrix(n + 1, n + 1)
    rhs = mp.matrix(n + 1, 1)
    for j in range(n + 1):
        for k in range(n + 1):
            a_mat[j, k] = rows[j][k]
        rhs[j] = -rows[j][deg]
    coef = mp.lu_solve(a_mat, rhs)
    coeffs = [coef[k] for k in range(n + 1)] + [mp.mpf(1)]

    def q(x):
        p = legendre_all(deg, x)
        return mp.fsum(c * v for c, v in zip(coeffs, p))

    brackets = [mp.mpf(-1)] + sorted(nodes) + [mp.mpf(1)]
    roots = []
    for lo, hi in zip(brackets[:-1], brackets[1:]):
        flo, fhi = q(lo), q(hi)
        if flo * fhi > 0:
            raise RuntimeError("no sign change; interlacing failed")
        for _ in range(600):
            mid = (lo + hi) / 2
            fm = q(mid)
            if fm == 0:
                lo = hi = mid
                break
            if flo * fm < 0:
                hi, fhi = mid, fm
            else:
                lo, flo = mid, fm
            if hi - lo < mp.mpf(10) ** (-mp.mp.dps + 15):
                break
        roots.append((lo + hi) / 2)
    return sorted(list(nodes) + roots)


def weights_for(nodes):
    n = len(nodes)
    vm = mp.matrix(n, n)
    for j, x in enumerate(nodes):
        p = legendre_all(n - 1, x)
        for k in range(n):
            vm[k, j] = p[k]
    rhs = mp.matrix(n, 1)
    rhs[0] = 2
    w = mp.lu_solve(vm, rhs)
    return [w[i] for i in range(n)]


def main():
    levels = []
    nodes = [mp.mpf(0)]
    levels.append((nodes, [mp.mpf(2)]))
    for level in range(2, MAX_LEVEL + 1):
        nodes = extend(nodes)
        assert len(nodes) == 2 ** level - 1
        w = weights_for(nodes)
        assert all(v > 0 for v in w)
        levels.append((nodes, w))
        print(f"level {level} done", file=sys.stderr)

    out = sys.stdout
    out.write("// Generated by tools/gen_patterson.py; do not edit.\n")
    out.write("// Nested Gauss-Patterson rules on [-1, 1], nodes ascending.\n\n")
    for level, (x, w) in enumerate(levels, start=1):
        # Enforce exact symmetry before rounding.
        n = len(x)
        xs = [(x[i] - x[n - 1 - i]) / 2 for i in range(n)]
        ws = [(w[i] + w[n - 1 - i]) / 2 for i in range(n)]
        out.write(f"constexpr std::array<double, {n}> kPattersonNodes{level} = {{\n")
        for v in xs:
            out.write(f"    {mp.nstr(v, 25, min_fixed=-1, max_fixed=1, strip_zeros=False)},\n")
        out.write("};\n")
        out.write(f"constexpr std::array<double, {n}> kPattersonWeights{level} = {{\n")
        for v in ws:
            out.write(f"    {mp.nstr(v, 25, min_fixed=-1, max_fixed=1, strip_zeros=False)},\n")
        out.write("};\n\n")


if __name__ == "__main__":
    main()
