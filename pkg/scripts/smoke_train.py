"""Train the default Sines model and print 100-step block means of the loss."""
import argparse
import time

from specdiff.config import RunConfig, load_config, override
from specdiff.pipeline import smoothed, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/smoke")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = override(cfg, seed=args.seed)
    t0 = time.perf_counter()
    res = train(cfg, args.out, log_stream=None, command="scripts/smoke_train.py")
    blocks = smoothed(res.losses, 100)
    print(f"steps {len(res.losses)} in {time.perf_counter() - t0:.1f}s, checkpoint {res.checkpoint_path}")
    print("block means: " + " ".join(f"{b:.3f}" for b in blocks))
    print("strictly decreasing:", bool((blocks[1:] < blocks[:-1]).all()))


if __name__ == "__main__":
    main()
