"""Error versus measurements per individual for the common design.

Runs the m-sweep once per privacy level with n = 200 fixed; the finite
privacy levels plateau in m while the non-private series keeps falling
until the sample-size bottleneck.
"""

import argparse
import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fedfda import harness as hn
from fedfda.datagen import CurveSpec, Design, ServerConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=271828)
    ap.add_argument("--out-dir", default="figure2_out")
    ap.add_argument("--epsilons", type=float, nargs="+",
                    default=[0.5, 1.0, 2.0, math.inf])
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = CurveSpec(R=2.0, L_star=15, p=0.9, alpha=1.0)
    for eps in args.epsilons:
        spec = hn.ExperimentSpec(
            design=Design.COMMON, curve=curve,
            servers=(ServerConfig(200, 64, eps, 0.0),),
            sweep="m", sweep_values=(16.0, 32.0, 64.0, 128.0, 256.0),
            replications=args.reps, base_seed=args.seed)
        rows = hn.run_sweep(spec)
        tag = "inf" if not math.isfinite(eps) else f"{eps:g}"
        hn.emit_csv(rows, out / f"risk_eps_{tag}.csv")
        hn.emit_plot(rows, out / f"series_eps_{tag}.csv")
        print(f"eps={tag}: " +
              "  ".join(f"m={r.sweep_value:g}:{r.mean_imse:.4g}" for r in rows))
    print(f"wrote results to {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
