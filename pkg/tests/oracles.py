"""Independent reference implementations used to check the package.

Each oracle is written from the textbook definition and shares no code with
the package.
"""

import cmath
import math
from collections import Counter
from fractions import Fraction

import numpy as np


def daubechies_lowpass(p: int) -> np.ndarray:
    """Extremal-phase Daubechies scaling filter with ``p`` vanishing moments.

    Spectral factorization: |H(w)|^2 = cos^2p(w/2) P(sin^2(w/2)) with
    P(y) = sum_k C(p-1+k, k) y^k. The minimum-phase half of the roots of
    P((2 - z - 1/z)/4), times (1 + z^-1)^p, gives the filter.
    """
    # polynomial in z: y = (2 - z - 1/z) / 4, multiply through by z^(p-1)
    poly = np.zeros(2 * p - 1, dtype=complex)
    for k in range(p):
        coef = math.comb(p - 1 + k, k) / 4.0 ** k
        # (2 - z - z^-1)^k * z^(p-1) expanded as coefficients of z^(p-1-k .. p-1+k)
        term = np.array([1.0])
        for _ in range(k):
            term = np.convolve(term, [-1.0, 2.0, -1.0])
        start = p - 1 - k
        poly[start:start + len(term)] += coef * term
    roots = np.roots(poly[::-1])
    inside = [r for r in roots if abs(r) < 1.0]
    h = np.array([1.0 + 0j])
    for r in inside:
        h = np.convolve(h, [1.0, -r])
    for _ in range(p):
        h = np.convolve(h, [1.0, 1.0])
    h = np.real(h)
    return h * (math.sqrt(2.0) / h.sum())


def direct_dft(x: np.ndarray) -> np.ndarray:
    """O(N^2 M^2) two-dimensional DFT by explicit summation."""
    n, m = x.shape
    out = np.zeros((n, m), dtype=complex)
    for u in range(n):
        for v in range(m):
            acc = 0j
            for r in range(n):
                for c in range(m):
                    acc += x[r, c] * cmath.exp(-2j * math.pi * (u * r / n + v * c / m))
            out[u, v] = acc
    return out


def otsu_exhaustive(counts) -> int:
    """Split index k (classes [0,k) and [k,bins)) maximizing between-class variance.

    Exact rational arithmetic with w0 * w1 * (mu0 - mu1)^2 over bin indices;
    the first maximizer wins.
    """
    total = sum(counts)
    best, best_k = None, None
    for k in range(1, len(counts)):
        n0 = sum(counts[:k])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        mu0 = Fraction(sum(i * counts[i] for i in range(k)), n0)
        mu1 = Fraction(sum(i * counts[i] for i in range(k, len(counts))), n1)
        var = Fraction(n0, total) * Fraction(n1, total) * (mu0 - mu1) ** 2
        if best is None or var > best:
            best, best_k = var, k
    return best_k


def two_pass_moments(values):
    """Population mean, std, skewness, kurtosis with compensated sums."""
    xs = [float(v) for v in values]
    n = len(xs)
    mu = math.fsum(xs) / n
    dev = [x - mu for x in xs]
    var = math.fsum(d * d for d in dev) / n
    sigma = math.sqrt(var)
    if sigma == 0.0:
        return mu, 0.0, 0.0, 0.0
    skew = math.fsum((d / sigma) ** 3 for d in dev) / n
    kurt = math.fsum((d / sigma) ** 4 for d in dev) / n
    return mu, sigma, skew, kurt


def quantile_symbols(column, bins: int):
    """Equal-frequency discretization from first principles.

    Cut values are the order statistics at ranks ceil(i * n / bins); a value's
    symbol is the number of distinct cut values (above the minimum) it reaches.
    """
    xs = sorted(float(v) for v in column)
    n = len(xs)
    cuts = set()
    for i in range(1, bins):
        pos = math.ceil(i * n / bins)
        if pos < n and xs[pos] > xs[0]:
            cuts.add(xs[pos])
    cuts = sorted(cuts)
    return [sum(1 for c in cuts if c <= float(v)) for v in column]


def mutual_information(a, b) -> float:
    """I(A; B) in bits from the joint histogram."""
    n = len(a)
    joint = Counter(zip(a, b))
    pa = Counter(a)
    pb = Counter(b)
    total = 0.0
    for (x, y), c in joint.items():
        total += (c / n) * math.log2(c * n / (pa[x] * pb[y]))
    return total


def entropy_bits(symbols) -> float:
    n = len(symbols)
    return -sum((c / n) * math.log2(c / n) for c in Counter(symbols).values())


def pairwise_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties count half)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))
