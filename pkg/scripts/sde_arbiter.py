"""Which score factor keeps the reverse SDE on the data marginal?

Data per bin is N(0, V0) so the exact score of every intermediate marginal is
known; the sampler should end with variance V0 per bin.
"""
import argparse

import numpy as np

from specdiff.noise import build_noise_model
from specdiff.sampler import SCORE_FACTORS, gaussian_score_fn, reverse_sde
from specdiff.schedule import build_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--steps", default="250,500,1000")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    s = build_schedule()
    m = build_noise_model(args.L)
    V0 = np.linspace(0.25, 4.0, m.K)
    print("factor\tsteps\tmax_rel_var_error\tmean_rel_var_error")
    for factor in SCORE_FACTORS:
        for steps in (int(x) for x in args.steps.split(",")):
            rng = np.random.default_rng(args.seed)
            R = rng.standard_normal((args.paths, m.K, 1)) * np.sqrt(m.var_real)[:, None]
            I = rng.standard_normal((args.paths, m.K, 1)) * np.sqrt(m.var_imag)[:, None]
            R, _ = reverse_sde(R, I, gaussian_score_fn(V0, V0, s, m), s.beta_continuous, m, steps, SCORE_FACTORS[factor], rng)
            rel = np.abs(R[..., 0].var(0) / V0 - 1)
            print(f"{factor}\t{steps}\t{rel.max():.4f}\t{rel.mean():.4f}")


if __name__ == "__main__":
    main()
