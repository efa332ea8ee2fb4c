"""Four successive loops around a dimer EP: sign pattern of the transported levels.

Also records the eigenvalue trajectory over one loop, which shows the two
levels trading places.
"""
import argparse
import csv

import numpy as np

from epcore import finder, linalg
from epcore.monodromy import LoopPath, exponent_fit, verify_cycle
from epcore.twolevel import TwoLevelParams


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=float, default=0.5)
    ap.add_argument("--samples", type=int, default=256)
    ap.add_argument("--out", default="dimer_loop.csv")
    args = ap.parse_args(argv)

    fam = TwoLevelParams.canonical_dimer().family()
    ep = finder.refine_ep(fam, -0.9j)
    print(f"EP at lam={ep.lam:.12g}, E={ep.energy:.12g}")

    rep = verify_cycle(fam, ep, args.radius)
    print("ccw factors:", np.round(rep.ccw, 8), "expected", rep.expected_ccw)
    print("cw factors: ", np.round(rep.cw, 8), "expected", rep.expected_cw)
    print(f"pattern error {rep.error:.1e}, passed={rep.passed}")
    g, c = exponent_fit(fam, ep)
    print(f"gap exponent {g:.4f}, overlap exponent {c:.4f}")

    # continuous eigenvalue branches along one loop, matched by nearest neighbour
    pts = LoopPath(ep.lam, args.radius, samples=args.samples).points()
    prev = np.sort_complex(linalg.eigenvalues(fam(pts[0])))
    rows = []
    for k, lam in enumerate(pts):
        w = linalg.eigenvalues(fam(lam))
        if abs(w[0] - prev[1]) + abs(w[1] - prev[0]) < abs(w[0] - prev[0]) + abs(w[1] - prev[1]):
            w = w[::-1]
        prev = w
        rows.append({"step": k, "lam_re": lam.real, "lam_im": lam.imag,
                     "E0_re": w[0].real, "E0_im": w[0].imag,
                     "E1_re": w[1].real, "E1_im": w[1].imag})
    with open(args.out, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
    print(f"branch 0 ends at {complex(rows[-1]['E0_re'], rows[-1]['E0_im']):.6g}, "
          f"started at {complex(rows[0]['E0_re'], rows[0]['E0_im']):.6g}; wrote {args.out}")


if __name__ == "__main__":
    main()
