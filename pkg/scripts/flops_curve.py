"""Savings curve under C = L and under a fixed width, with an optional plot."""
import argparse

from specdiff import complexity as cx


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", default="24,48,96,128,256,512,1024,2048,4096")
    ap.add_argument("--width", type=int, default=64, help="fixed width for the second curve")
    ap.add_argument("--plot", help="PNG path prefix")
    args = ap.parse_args()
    Ls = [int(x) for x in args.L.split(",")]
    for label, rule in (("C=L", cx.width_equals_length), (f"C={args.width}", lambda L: args.width)):
        print(cx.flops_table(Ls, rule, rule_label=label))
        rows = cx.savings_curve(Ls, rule)
        print("# total savings:", cx.sparkline([r[3] for r in rows], 0.0, 0.5), "\n")
        if args.plot:
            cx.plot_savings(rows, f"{args.plot}_{label.replace('=', '')}.png", title=f"FLOP savings ({label})")


if __name__ == "__main__":
    main()
