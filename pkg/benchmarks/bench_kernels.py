"""Compare the compiled and pure-Python codec kernels.

    python benchmarks/bench_kernels.py [--frames N] [--repeat R]

Times CRC-15, stuffing and destuffing over a fixed corpus of random frame
bodies, plus a full encode/decode round trip through each backend, and
prints one row per (kernel, backend) with the speedup over pure Python.
"""
import argparse
import random
import timeit

from printcan import kernels
from printcan.frame import DataFrame, decode_frame, encode_frame
from printcan.kernels import available_backends


def corpus(n, seed=0):
    rng = random.Random(seed)
    frames = [DataFrame(rng.randrange(0x800), rng.randbytes(rng.randint(0, 8))) for _ in range(n)]
    # raw SOF..data bodies: cheap stand-ins of realistic length and bit mix
    bodies = [bytes(rng.getrandbits(1) for _ in range(rng.randint(19, 83))) for _ in range(n)]
    return frames, bodies


def bench(impl, frames, bodies, repeat):
    stuffed = [impl.stuff(b) for b in bodies]
    cases = {
        "crc15": lambda: [impl.crc15(b) for b in bodies],
        "stuff": lambda: [impl.stuff(b) for b in bodies],
        "destuff": lambda: [impl.destuff(s) for s in stuffed],
    }

    def roundtrip():
        saved = kernels.crc15, kernels.stuff, kernels.destuff
        kernels.crc15, kernels.stuff, kernels.destuff = impl.crc15, impl.stuff, impl.destuff
        encode_frame.cache_clear()  # time the codec, not the cache
        try:
            for f in frames:
                decode_frame(encode_frame(f))
        finally:
            kernels.crc15, kernels.stuff, kernels.destuff = saved
            encode_frame.cache_clear()

    cases["encode+decode"] = roundtrip
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    frames, bodies = corpus(args.frames)
    backends = available_backends()
    results = {name: bench(impl, frames, bodies, args.repeat) for name, impl in backends.items()}
    base = results["python"]
    print(f"{args.frames} frames, best of {args.repeat}")
    print(f"{'kernel':<14} {'backend':<8} {'total ms':>10} {'us/frame':>10} {'speedup':>8}")
    for kernel in base:
        for name, timings in results.items():
            t = timings[kernel]
            print(f"{kernel:<14} {name:<8} {t * 1e3:>10.2f} {t * 1e6 / args.frames:>10.2f} "
                  f"{base[kernel] / t:>7.1f}x")
    if "cython" not in results:
        print("compiled backend not built; only the pure-Python fallback was timed")


if __name__ == "__main__":
    main()
