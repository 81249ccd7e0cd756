"""Average relative training cost of QR-based RLS and GLVQ (both divided by
the straightforward RLS cost) over sampled (T, N, L) triples.

    python3 scripts/cost_comparison.py --iterations 10 --samples 5000
"""
import argparse

import numpy as np

from intrvfl.costmodel import CostInputs, relative_cost


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--iterations", type=int, default=10)
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--t-range", type=int, nargs=2, default=[100, 5000])
    ap.add_argument("--n-range", type=int, nargs=2, default=[500, 1500])
    ap.add_argument("--l-range", type=int, nargs=2, default=[2, 10])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    ratios = []
    for _ in range(args.samples):
        c = CostInputs(t=int(rng.integers(args.t_range[0], args.t_range[1] + 1)),
                       n=int(rng.integers(args.n_range[0], args.n_range[1] + 1)),
                       l=int(rng.integers(args.l_range[0], args.l_range[1] + 1)),
                       p=args.p, i=args.iterations)
        ratios.append(relative_cost(c))
    qr, glvq = np.array(ratios).T
    print(f"mean qr/direct   {qr.mean():.3f}")
    print(f"mean glvq/direct {glvq.mean():.3f}")
    print(f"glvq cheaper than qr in {np.mean(glvq < qr):.1%} of {args.samples} triples")


if __name__ == "__main__":
    main()
