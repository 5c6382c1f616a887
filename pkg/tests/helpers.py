import itertools
import math

import numpy as np


def random_unitary(rng, n=2):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _perm(m):
    n = m.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def dense_operator(U_full, rails, cutoff):
    """Fock-space matrix of a linear-optical unitary from permanents of U submatrices.

    <m|U|n> = perm(U[m, n]) / sqrt(prod m! prod n!), rows repeated m_i times and
    columns n_j times. Restricted to occupations <= cutoff per rail.
    """
    basis = list(itertools.product(range(cutoff + 1), repeat=rails))
    idx = {b: i for i, b in enumerate(basis)}
    M = np.zeros((len(basis), len(basis)), dtype=complex)
    for n in basis:
        cols = [j for j, c in enumerate(n) for _ in range(c)]
        for m in basis:
            if sum(m) != sum(n):
                continue
            rows = [i for i, c in enumerate(m) for _ in range(c)]
            sub = U_full[np.ix_(rows, cols)]
            norm = math.sqrt(np.prod([math.factorial(x) for x in m]) * np.prod([math.factorial(x) for x in n]))
            M[idx[m], idx[n]] = _perm(sub) / norm
    return basis, M


def embed(U, rails, pair):
    """2x2 unitary on ``pair`` as a rails x rails mode matrix."""
    full = np.eye(rails, dtype=complex)
    for a, i in enumerate(pair):
        for b, j in enumerate(pair):
            full[i, j] = U[a, b]
    return full
