"""Static noiseless phantom: RMSE of full-scan MBIR against the truth per iteration count.

    python scripts/noiseless_regression.py --iterations 10 25 50 --beta 16
"""
import argparse
from dataclasses import replace
from importlib import resources

import numpy as np

from sawmbir.config import load_config
from sawmbir.phantom import rasterize, simulate_sinogram
from sawmbir.recon import reconstruct


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, nargs="+", default=[10, 25, 50])
    ap.add_argument("--beta", type=float, default=None)
    ap.add_argument("--potential", choices=["quadratic", "huber"], default=None)
    args = ap.parse_args()

    overrides = []
    if args.beta is not None:
        overrides.append(("recon", "beta", str(args.beta)))
    if args.potential:
        overrides.append(("recon", "potential", args.potential))
    cfg = load_config(resources.files("sawmbir") / "data" / "paper_demo.ini").with_overrides(overrides)
    g = cfg.geometry
    spec = cfg.phantom.frozen()
    truth = rasterize(spec, 0.0, g).values
    contrast = truth.max() - truth.min()
    y = simulate_sinogram(spec, g)
    print("iterations,rmse_percent_of_contrast,seconds")
    for k in args.iterations:
        rc = cfg.recon("full_mbir")
        x, rep = reconstruct(y, g, replace(rc, max_iterations=k, convergence_tol=0.0))
        rmse = np.sqrt(np.mean((x.values - truth) ** 2)) / contrast
        print(f"{k},{100 * rmse:.3f},{sum(rep.seconds):.1f}")


if __name__ == "__main__":
    main()
