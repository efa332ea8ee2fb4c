"""EP3 perturbed off the symmetric point: the EP2 pair that sprouts from it."""
import argparse
import csv

import numpy as np

from epcore import finder
from epcore.models import ep3_family, ep3_sprouting


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5])
    ap.add_argument("--out", default="ep3_sprouting.csv")
    args = ap.parse_args(argv)

    H0 = ep3_family(0.0)(0.0)
    print("jordan chain at the origin (geometric, algebraic):", finder.jordan_chain_length(H0))

    rows = []
    for eps in args.eps:
        pair = [e for e in ep3_sprouting(eps) if e.is_ep]
        sep = abs(pair[0].lam - pair[1].lam) if len(pair) == 2 else np.nan
        print(f"eps={eps:.0e}  EP2 count={len(pair)}  separation={sep:.2e}  "
              f"max|lam|={max(abs(e.lam) for e in pair):.2e}")
        rows += [{"eps": eps, "lam_re": e.lam.real, "lam_im": e.lam.imag, "order": e.order,
                  "exponent": e.exponent, "separation": sep} for e in pair]
    if len(args.eps) > 1:
        seps = np.array([r["separation"] for r in rows[::2]])
        slope = np.polyfit(np.log(args.eps), np.log(seps), 1)[0]
        print(f"log-log slope of separation vs eps: {slope:.3f}")

    with open(args.out, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
