"""Time pair synthesis (blend + reshape, both directions) at a given resolution.

Inputs are drawn with make_fixture, loaded once, then forged in memory so
that PNG decoding and encoding are not counted.

    python scripts/bench_synthesis.py --size 256 --pairs 8
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
import make_fixture  # noqa: E402

from cycleforge.forge import PairInputs, forge_pair  # noqa: E402


def measure(workdir: Path, pairs: int = 8, size: int = 256, repeats: int = 3, seed: int = 7) -> float:
    """Best-of-``repeats`` rate in pair syntheses per second."""
    rng = np.random.default_rng(seed)
    loaded = []
    for i in range(pairs):
        rec = make_fixture.make_pair(workdir, f"b{i:03d}", rng, size)
        pair = PairInputs.from_json(rec, workdir)
        loaded.append((pair, pair.load()))
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for pair, arrays in loaded:
            forge_pair(pair, arrays)
        best = min(best, time.perf_counter() - start)
    return pairs / best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--pairs", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as d:
        rate = measure(Path(d), args.pairs, args.size, args.repeats)
    print(f"{rate:.2f} pairs/s at {args.size}x{args.size} ({args.pairs} pairs, best of {args.repeats})")


if __name__ == "__main__":
    main()
