"""Slow, deliberately plain reference implementations used as test oracles."""

import math


def naive_pairwise_lip(F, X, threshold=1e-9):
    """Double loop over pairs with the distance summed in coordinate order."""
    F = [list(map(float, row)) for row in F]
    X = [list(map(float, row)) for row in X]
    best = 0.0
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            s = 0.0
            for a, b in zip(X[i], X[j]):
                t = a - b
                s += t * t
            dist = math.sqrt(s)
            if dist < threshold:
                continue
            for c in range(len(F[i])):
                best = max(best, abs(F[i][c] - F[j][c]) / dist)
    return best


def decimal_lower_bound(eps, L, rho, sigma, n, delta):
    """50-digit evaluation of the overfitting lower bound, written out from scratch."""
    from decimal import Decimal, localcontext

    with localcontext() as ctx:
        ctx.prec = 50
        eps, L, rho, sigma, delta = (Decimal(float(v)) for v in (eps, L, rho, sigma, delta))
        gamma = eps - (2 * L * rho * sigma + (L * rho) ** 2)
        a = (2 + L * rho) ** 2
        conf = (2 * (Decimal(2) / delta).ln() / Decimal(n)).sqrt()
        return float(gamma / 2 - a / 2 * conf)
