"""Pure-Python twin of the compiled kernels; used when the extension is unavailable."""

import numpy as np


def two_rail_transform(keys, amps, shift1, shift2, bits, nmax, coef):
    mask = (1 << bits) - 1
    clear = ~((mask << shift1) | (mask << shift2))
    out = {}
    for key, a in zip(keys.tolist(), amps.tolist()):
        n1 = (key >> shift1) & mask
        n2 = (key >> shift2) & mask
        total = n1 + n2
        base = key & clear
        row = coef[n1, n2]
        for k in range(max(0, total - nmax), min(total, nmax) + 1):
            c = row[k]
            if c == 0:
                continue
            new = base | (k << shift1) | ((total - k) << shift2)
            out[new] = out.get(new, 0j) + a * c
    return (
        np.fromiter(out.keys(), dtype=np.int64, count=len(out)),
        np.fromiter(out.values(), dtype=np.complex128, count=len(out)),
    )
