"""Effective-dimension table for a grid of homogeneous federations.

Prints D*, the resulting risk, and the binding regime for both designs
across a small (n, m, epsilon) grid; handy for eyeballing where the
privacy terms start to dominate.
"""

import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fedfda.datagen import ServerConfig
from fedfda.rates import solve_common, solve_independent

ALPHA = 1.0


def main() -> int:
    print(f"{'n':>6} {'m':>5} {'eps':>6} | {'D* common':>10} {'regime':>15} "
          f"| {'D* indep':>10} {'regime':>20}")
    for n in (50, 200, 800):
        for m in (16, 64, 256):
            for eps in (0.25, 1.0, math.inf):
                delta = 0.0 if not math.isfinite(eps) else 1.0 / n**2
                servers = [ServerConfig(n, m, eps, delta)]
                c = solve_common(servers, m, ALPHA)
                i = solve_independent(servers, ALPHA)
                tag = "inf" if not math.isfinite(eps) else f"{eps:g}"
                print(f"{n:>6} {m:>5} {tag:>6} | {c.d_star:>10.3f} "
                      f"{c.regimes[0].value:>15} | {i.d_star:>10.3f} "
                      f"{i.regimes[0].value:>20}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
