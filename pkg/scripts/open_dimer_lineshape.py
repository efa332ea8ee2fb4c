"""Cross section of an open dimer tuned to its EP, with a Lorentzian fit for contrast."""
import argparse
import csv

import numpy as np

from epcore import finder, response


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=801)
    ap.add_argument("--out", default="open_dimer_lineshape.csv")
    args = ap.parse_args(argv)

    fam = response.open_dimer().family()
    ep = finder.refine_ep(fam, response.open_dimer_ep()[0], max_radius=0.1)
    print(f"EP at lam={ep.lam:.10g}, E={ep.energy:.10g}")

    grid = np.linspace(ep.energy.real - 3, ep.energy.real + 3, args.points)
    shape = response.cross_section(fam, ep.lam, [1, 0], [1, 0], grid)
    fit = response.lorentz_fit(shape)
    print(f"Lorentzian fit: center={fit.center:.4f} width={fit.width:.4f} "
          f"relative residual={fit.residual:.2e}")

    model = response.lorentzian(grid, fit.center, fit.width, fit.amplitude)
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["E", "sigma", "lorentz_fit"])
        wr.writerows(zip(grid, shape.values, model))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
