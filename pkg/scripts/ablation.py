"""Interactive vs decoupled denoiser on the Sines smoke task, averaged over seeds."""
import argparse

import numpy as np

from specdiff.config import RunConfig
from specdiff.pipeline import ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--n", type=int, default=512, help="samples scored per model")
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    out = ablation(RunConfig(), seeds=seeds, n_samples=args.n)
    print("variant\tseed\tspectral_density_distance\tcorrelational_score")
    for v, reps in out.items():
        for s, r in zip(seeds, reps):
            print(f"{v}\t{s}\t{r.spectral_density_distance:.4f}\t{r.correlational_score:.4f}")
    for v, reps in out.items():
        sdd = np.mean([r.spectral_density_distance for r in reps])
        corr = np.mean([r.correlational_score for r in reps])
        print(f"{v}\tmean\t{sdd:.4f}\t{corr:.4f}")


if __name__ == "__main__":
    main()
