"""Loss against total corpus size nN on a fixed sparse A; reports the log-log slope.

    python scripts/run_rate_sweep.py --factors 1 4 16 --reps 10
"""
import argparse
from pathlib import Path

from stmkit.evaluation import results_to_csv, sweep_rate
from stmkit.synthgen import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=300)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--K", type=int, default=10)
    ap.add_argument("--N", type=int, default=500)
    ap.add_argument("--eta", type=float, default=0.5)
    ap.add_argument("--factors", type=float, nargs="+", default=[1, 4, 16])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", default="results/rate.csv")
    args = ap.parse_args()

    cfg = SynthConfig(p=args.p, n=args.n, K=args.K, N=args.N, eta=args.eta, seed=args.seed)
    results, slope = sweep_rate(cfg, args.factors, args.reps, threads=args.threads)
    for r in results:
        print(f"nN={r.grid_value:.0f}  loss={r.mean_loss:.4f} (sd {r.sd_loss:.4f})  failed={r.failed}")
    print(f"log-log slope: {slope:.3f}  (sqrt rate would give -0.5)")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(results_to_csv(results))


if __name__ == "__main__":
    main()
