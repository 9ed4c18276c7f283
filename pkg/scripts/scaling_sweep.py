"""Fitted log-log exponents: polynomial degree, Grover rounds, substeps."""

import argparse
import json

from lindode.budget import HarnessSuite, scaling_harness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--poly-eps", type=float, default=1e-4)
    ap.add_argument("--json", action="store_true", help="dump the full report")
    args = ap.parse_args()
    rep = scaling_harness(HarnessSuite(seed=args.seed, poly_eps=args.poly_eps))
    if args.json:
        print(json.dumps(rep, indent=1, default=float))
        return
    for axis in rep["axes"]:
        tag = "ok" if axis["passed"] else "OUT OF RANGE"
        print(f"{axis['axis']:<24} exponent {axis['exponent']:+.3f} (expected {axis['expected']:+.0f})  {tag}")
        print(f"{'':<24} x={axis['x']}\n{'':<24} y={axis['y']}")
    print("k_star * eta     :", [round(v, 3) for v in rep["k_star_times_eta"]])
    print("degree * delta   :", [round(v, 2) for v in rep["degree_times_delta"]])
    print("substeps / T     :", [round(v, 1) for v in rep["substeps_per_time"]])


if __name__ == "__main__":
    main()
