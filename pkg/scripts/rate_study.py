"""Strong-error rate studies for the catalog models.

    python scripts/rate_study.py --model indicator-1d --paths 10000 --finest 9
    python scripts/rate_study.py --model gbm --out gbm.csv

Prints the ladder, the fitted slope and the theoretical rate; ``--out``
writes the harness CSV.
"""

import argparse
import os
import time

from singular_em import harness as H
from singular_em import models as M


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="indicator-1d", choices=[m.label for m in M.builtin_models()])
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--coarsest", type=int, default=4, help="ladder starts at 2^-coarsest")
    ap.add_argument("--finest", type=int, default=9, help="ladder ends at 2^-finest")
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--truncation", choices=H.TRUNCATION_MODES, default="none")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out")
    return ap.parse_args()


def main():
    args = parse_args()
    config = H.StudyConfig(
        model_label=args.model,
        delta_ladder=tuple(2.0**-j for j in range(args.coarsest, args.finest + 1)),
        beta=args.beta,
        n_paths=args.paths,
        seed=args.seed,
        truncation_mode=args.truncation,
    )
    t0 = time.perf_counter()
    fit = H.run_convergence(config, threads=args.threads)
    elapsed = time.perf_counter() - t0
    for delta, mean, se in fit.points:
        print(f"{delta:12.6g}  {mean:.6e}  {se:.2e}")
    report = H.rate_report(fit)
    print(report.as_text())
    print(f"{elapsed:.1f} s")
    if args.out:
        H.write_csv(fit, args.out)


if __name__ == "__main__":
    main()
