"""Compiled vs pure-Python two-rail kernel.

Times the bare kernel, the full ``apply_two_rail_unitary`` call (kernel plus
key bookkeeping) on random states of growing support, and whole scheme runs.

    python benchmarks/bench_kernels.py [--sizes 100 1000 10000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from lingate import kernels
from lingate.circuits import SourceSettings, build_inputs, load_scheme, run
from lingate.detection import DetectorParams
from lingate.elements import hwp_matrix
from lingate.fock import PureFockState, apply_two_rail_unitary, transfer_table
from lingate.sources import TwoQubitAmplitudes


def random_state(n, rails, cutoff, rng):
    occ = rng.integers(0, cutoff + 1, size=(n, rails))
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PureFockState.from_amplitudes({tuple(o): a for o, a in zip(occ.tolist(), amps)}, cutoff)


def best(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_states(sizes, repeat, backends):
    rng = np.random.default_rng(0)
    U = hwp_matrix(0.3)
    table = transfer_table(U, 2)
    print(f"{'terms':>8}  " + "  ".join(f"{b + ' kernel':>16}{b + ' apply':>16}" for b in backends)
          + ("  speedup(kernel, apply)" if len(backends) > 1 else ""))
    for n in sizes:
        s = random_state(n, 16, 2, rng)
        row = {}
        for b in backends:
            mod = kernels.get_backend(b)
            k = best(lambda: mod.two_rail_transform(s.keys, s.amps, 8, 10, s.bits, 2, table), repeat)
            a = best(lambda: apply_two_rail_unitary(s, (4, 5), U, backend=b), repeat)
            row[b] = (k, a)
        line = f"{len(s):>8}  " + "  ".join(f"{row[b][0] * 1e3:>13.3f}ms{row[b][1] * 1e3:>13.3f}ms"
                                            for b in backends)
        if len(backends) > 1:
            (ck, ca), (pk, pa) = row["compiled"], row["python"]
            line += f"  x{pk / ck:.1f}, x{pa / ca:.1f}"
        print(line)


def bench_schemes(repeat, backends):
    a = TwoQubitAmplitudes.random(np.random.default_rng(1))
    cases = [
        ("scheme2-cs ideal", "scheme2-cs", SourceSettings("ideal"), DetectorParams(0.7), "all"),
        ("scheme2-cs realistic", "scheme2-cs", SourceSettings("spdc", 1e-4),
         DetectorParams(0.7, 100, 1e-8), "identity"),
        ("scheme1-cnot ideal", "scheme1-cnot", SourceSettings("ideal"), DetectorParams(0.7), "all"),
    ]
    print(f"\n{'scheme run':<24}" + "".join(f"{b:>14}" for b in backends))
    for label, name, src, det, post in cases:
        program = load_scheme(name)
        inputs = build_inputs(program, a, src)
        times = [best(lambda: run(program, inputs, det, post, backend=b), repeat) for b in backends]
        print(f"{label:<24}" + "".join(f"{t * 1e3:>12.2f}ms" for t in times))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 10000, 100000])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = sorted(kernels.BACKENDS)
    if "compiled" not in backends:
        print("compiled extension not built; timing the pure-Python kernel only")
    bench_states(args.sizes, args.repeat, backends)
    bench_schemes(args.repeat, backends)


if __name__ == "__main__":
    main()
