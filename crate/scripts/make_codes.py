#!/usr/bin/env python3
"""Generate the parity-check and generator matrices shipped under codes/.

Constructions:
  * BCH(n, k): cyclic shift-register matrices. G rows are shifts of the
    generator polynomial g(x); H rows are shifts of the reciprocal check
    polynomial h*(x) with h(x) = (x^n + 1) / g(x). G H^T = 0 because
    g(x) h(x) = x^n + 1.
  * Polar(n, k): frozen set from the Bhattacharyya parameter recursion at a
    design Eb/N0; H is the transposed frozen-column slice of F^{tensor m},
    G the non-frozen rows.
  * LDPC(96, 48): (3,6)-regular progressive-edge-growth construction
    (girth-greedy, exact degree fill), same parameters as the classic
    96.3.963 benchmark. G from the GF(2) null space.

Everything is deterministic; rerunning regenerates identical files.
"""

import os
import sys
from collections import deque

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "hyperbp", "codes")

# ---------------------------------------------------------------------------
# GF(2) polynomial helpers (integers as coefficient bit vectors, LSB = x^0)


def poly_mul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def poly_divmod(a, b):
    db = b.bit_length() - 1
    q = 0
    while a.bit_length() - 1 >= db and a:
        shift = a.bit_length() - 1 - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def poly_coeffs(p, width):
    return [(p >> i) & 1 for i in range(width)]


class GF2m:
    def __init__(self, m, prim):
        self.m = m
        self.prim = prim
        self.size = 1 << m

    def mul(self, a, b):
        r = 0
        while b:
            if b & 1:
                r ^= a
            a <<= 1
            if a & self.size:
                a ^= self.prim
            b >>= 1
        return r

    def pow_alpha(self, e):
        r = 1
        a = 2  # alpha
        e %= self.size - 1
        while e:
            if e & 1:
                r = self.mul(r, a)
            a = self.mul(a, a)
            e >>= 1
        return r


def minimal_polynomial(field, exponents):
    """prod (x - alpha^j) over the cyclotomic coset, as a GF(2) polynomial."""
    # Polynomial over GF(2^m): list of coefficients, index = degree.
    poly = [1]
    for j in exponents:
        root = field.pow_alpha(j)
        # poly *= (x + root)
        new = [0] * (len(poly) + 1)
        for d, c in enumerate(poly):
            new[d + 1] ^= c
            new[d] ^= field.mul(c, root)
        poly = new
    out = 0
    for d, c in enumerate(poly):
        assert c in (0, 1), "minimal polynomial must land in GF(2)"
        out |= c << d
    return out


def cyclotomic_coset(i, n):
    coset = []
    j = i
    while j not in coset:
        coset.append(j)
        j = (2 * j) % n
    return coset


def bch_matrices(n, k, m, prim, odd_roots):
    field = GF2m(m, prim)
    g = 1
    seen = set()
    for i in odd_roots:
        coset = cyclotomic_coset(i, n)
        if seen & set(coset):
            continue
        seen |= set(coset)
        g = poly_mul(g, minimal_polynomial(field, coset))
    assert g.bit_length() - 1 == n - k, f"g degree {g.bit_length()-1} != {n-k}"
    xn1 = (1 << n) | 1
    h, rem = poly_divmod(xn1, g)
    assert rem == 0
    # Reciprocal of h (degree k).
    hc = poly_coeffs(h, k + 1)
    hstar = 0
    for d, c in enumerate(hc):
        if c:
            hstar |= 1 << (k - d)

    # Sparsify: the dual code (generated by h*) usually contains rows lighter
    # than h* itself. Enumerate it, take a minimum-weight word, and use its
    # cyclic shifts (the dual of a cyclic code is cyclic); top up greedily
    # with other light words if the shifts alone are rank deficient.
    shifts = [poly_coeffs(hstar << j, n) for j in range(n - k)]
    base_rows = [int("".join(map(str, r)), 2) for r in shifts]
    words = []
    for mask in range(1, 1 << (n - k)):
        v = 0
        m, i = mask, 0
        while m:
            if m & 1:
                v ^= base_rows[i]
            m >>= 1
            i += 1
        words.append((bin(v).count("1"), v))
    min_w = min(w for w, _ in words)
    light = sorted({v for w, v in words if w == min_w})

    def rotate(v, j):
        return ((v << j) | (v >> (n - j))) & ((1 << n) - 1) if j else v

    chosen = []
    for j in range(n):
        cand = chosen + [rotate(light[0], j)]
        bits = [[(x >> (n - 1 - c)) & 1 for c in range(n)] for c_ in [0] for x in cand]
        if rank_gf2(bits, n) == len(cand):
            chosen = cand
        if len(chosen) == n - k:
            break
    for v in light[1:]:
        if len(chosen) == n - k:
            break
        cand = chosen + [v]
        bits = [[(x >> (n - 1 - c)) & 1 for c in range(n)] for x in cand]
        if rank_gf2(bits, n) == len(cand):
            chosen = cand
    assert len(chosen) == n - k, "not enough independent light dual words"
    H = [[(v >> (n - 1 - c)) & 1 for c in range(n)] for v in chosen]

    G = [[0] * n for _ in range(k)]
    for i in range(k):
        G[i] = poly_coeffs(g << i, n)
    return H, G


# ---------------------------------------------------------------------------
# Polar


def polar_matrices(nbits, n, k, design_snr_db):
    rate = k / n
    z0 = pow(2.718281828459045, -rate * (10 ** (design_snr_db / 10)))
    z = [z0]
    for _ in range(nbits):
        minus = [2 * v - v * v for v in z]
        plus = [v * v for v in z]
        z = minus + plus
    order = sorted(range(n), key=lambda i: -z[i])  # worst first
    frozen = sorted(order[: n - k])
    active = sorted(set(range(n)) - set(frozen))

    def M(i, j):  # F^{tensor nbits}: 1 iff support(j) subseteq support(i)
        return 1 if (j & ~i) == 0 else 0

    H = [[M(v, f) for v in range(n)] for f in frozen]
    G = [[M(a, j) for j in range(n)] for a in active]
    return H, G, frozen


# ---------------------------------------------------------------------------
# PEG LDPC


def peg_ldpc(n, m, dv, dc, seed):
    rngstate = seed

    def rnd():
        nonlocal rngstate
        rngstate = (rngstate * 6364136223846793005 + 1442695040888963407) % (1 << 64)
        return rngstate >> 33

    var_adj = [[] for _ in range(n)]
    chk_adj = [[] for _ in range(m)]

    def bfs_check_distances(v):
        dist = {}
        q = deque()
        for c in var_adj[v]:
            dist[("c", c)] = 1
            q.append(("c", c))
        seen_v = {v}
        while q:
            kind, node = q.popleft()
            d = dist[(kind, node)]
            if kind == "c":
                for v2 in chk_adj[node]:
                    if v2 not in seen_v:
                        seen_v.add(v2)
                        key = ("v", v2)
                        if key not in dist:
                            dist[key] = d + 1
                            q.append(key)
            else:
                for c2 in var_adj[node]:
                    key = ("c", c2)
                    if key not in dist:
                        dist[key] = d + 1
                        q.append(key)
        return {c: dist.get(("c", c), float("inf")) for c in range(m)}

    order = list(range(n))
    for v in order:
        for _edge in range(dv):
            dist = bfs_check_distances(v)
            candidates = [c for c in range(m) if len(chk_adj[c]) < dc and c not in var_adj[v]]
            assert candidates, "capacity argument guarantees a candidate"
            far = max(dist[c] for c in candidates)
            pool = [c for c in candidates if dist[c] == far]
            mindeg = min(len(chk_adj[c]) for c in pool)
            pool = [c for c in pool if len(chk_adj[c]) == mindeg]
            c = pool[rnd() % len(pool)]
            var_adj[v].append(c)
            chk_adj[c].append(v)

    H = [[0] * n for _ in range(m)]
    for v in range(n):
        for c in var_adj[v]:
            H[c][v] = 1
    return H


def girth(H):
    m, n = len(H), len(H[0])
    var_adj = [[c for c in range(m) if H[c][v]] for v in range(n)]
    chk_adj = [[v for v in range(n) if H[c][v]] for c in range(m)]
    best = float("inf")
    for start in range(n):
        dist = {("v", start): 0}
        q = deque([("v", start, -1, -1)])  # kind, node, parent kind idx
        while q:
            kind, node, pk, pn = q.popleft()
            d = dist[(kind, node)]
            neigh = var_adj[node] if kind == "v" else chk_adj[node]
            nkind = "c" if kind == "v" else "v"
            for nx in neigh:
                if nkind == pk and nx == pn:
                    continue
                key = (nkind, nx)
                if key in dist:
                    best = min(best, d + 1 + dist[key])
                else:
                    dist[key] = d + 1
                    q.append((nkind, nx, kind, node))
    return best


# ---------------------------------------------------------------------------
# GF(2) linear algebra


def rank_gf2(rows, ncols):
    rr = [int("".join(map(str, r)), 2) if r else 0 for r in rows]
    rank = 0
    for col in range(ncols):
        bit = 1 << (ncols - 1 - col)
        pivot = None
        for i in range(rank, len(rr)):
            if rr[i] & bit:
                pivot = i
                break
        if pivot is None:
            continue
        rr[rank], rr[pivot] = rr[pivot], rr[rank]
        for i in range(len(rr)):
            if i != rank and rr[i] & bit:
                rr[i] ^= rr[rank]
        rank += 1
    return rank


def null_space_basis(H, n, k):
    """k independent codewords of H (rows of G)."""
    m = len(H)
    rows = [int("".join(map(str, r)), 2) for r in H]
    pivots = []
    rank = 0
    for col in range(n):
        bit = 1 << (n - 1 - col)
        pivot = None
        for i in range(rank, len(rows)):
            if rows[i] & bit:
                pivot = i
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] & bit:
                rows[i] ^= rows[rank]
        pivots.append(col)
        rank += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free[:k]:
        vec = [0] * n
        vec[f] = 1
        fbit = 1 << (n - 1 - f)
        for r, p in zip(rows[:rank], pivots):
            if r & fbit:
                vec[p] = 1
        basis.append(vec)
    return basis


def check_orthogonal(G, H):
    for gi, grow in enumerate(G):
        for hrow in H:
            if sum(a & b for a, b in zip(grow, hrow)) % 2 != 0:
                raise AssertionError(f"G row {gi} not orthogonal to H")


# ---------------------------------------------------------------------------
# Writers


def to_alist(H):
    m, n = len(H), len(H[0])
    col = [[c + 1 for c in range(m) if H[c][v]] for v in range(n)]
    row = [[v + 1 for v in range(n) if H[c][v]] for c in range(m)]
    cd = [len(x) for x in col]
    rd = [len(x) for x in row]
    lines = [f"{n} {m}", f"{max(cd)} {max(rd)}",
             " ".join(map(str, cd)), " ".join(map(str, rd))]
    lines += [" ".join(map(str, x)) for x in col]
    lines += [" ".join(map(str, x)) for x in row]
    return "\n".join(lines) + "\n"


def to_dense(M):
    return "\n".join(" ".join(map(str, row)) for row in M) + "\n"


def emit(name, H, G=None):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, f"{name}.alist"), "w") as f:
        f.write(to_alist(H))
    if G is not None:
        check_orthogonal(G, H)
        with open(os.path.join(OUT, f"{name}.gmat"), "w") as f:
            f.write(to_dense(G))
    m, n = len(H), len(H[0])
    e = sum(sum(r) for r in H)
    print(f"{name}: n={n} m={m} E={e} rankH={rank_gf2(H, n)}"
          + (f" rankG={rank_gf2(G, n)}" if G else ""))


def main():
    # BCH over GF(32), prim x^5 + x^2 + 1.
    H, G = bch_matrices(31, 16, 5, 0b100101, [1, 3, 5])
    emit("bch_31_16", H, G)

    # BCH over GF(64), prim x^6 + x + 1.
    H, G = bch_matrices(63, 51, 6, 0b1000011, [1, 3])
    emit("bch_63_51", H, G)

    # Polar(64, 48).
    design = float(sys.argv[1]) if len(sys.argv) > 1 else 2.0
    H, G, frozen = polar_matrices(6, 64, 48, design)
    print(f"polar frozen set (design {design} dB): {frozen}")
    emit("polar_64_48", H, G)

    # (3,6)-regular LDPC(96, 48).
    for seed in range(1, 100):
        H = peg_ldpc(96, 48, 3, 6, seed)
        g = girth(H)
        r = rank_gf2(H, 96)
        if g >= 6 and r == 48:
            print(f"ldpc seed {seed}: girth {g} rank {r}")
            break
    else:
        raise SystemExit("no PEG seed produced girth>=6 full-rank H")
    G = null_space_basis(H, 96, 48)
    emit("mackay_96_48", H, G)

    # Small fixtures for tests and examples.
    toy = [
        [1, 1, 0, 1, 0],
        [1, 0, 0, 0, 1],
        [0, 1, 1, 0, 1],
    ]
    # Column degrees all 2 except col 2; adjust to make every column degree 2
    # and E = 10 (the regular d_v = 2 fixture).
    toy = [
        [1, 1, 0, 1, 0],
        [1, 0, 1, 1, 1],
        [0, 1, 1, 0, 1],
    ]
    assert all(sum(toy[r][c] for r in range(3)) == 2 for c in range(5))
    emit("toy_5_2", toy)

    for seed in range(1, 50):
        H = peg_ldpc(12, 6, 3, 6, seed)
        if girth(H) >= 6:
            print(f"ldpc_12_6 seed {seed}: girth {girth(H)} rank {rank_gf2(H, 12)}")
            break
    G = null_space_basis(H, 12, 6)
    emit("ldpc_12_6", H, G)


if __name__ == "__main__":
    main()
