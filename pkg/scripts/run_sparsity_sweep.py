"""Aligned l1 loss of the estimator as A gets sparser (desk-scale synthetic setting).

    python scripts/run_sparsity_sweep.py --reps 10 --out results/sparsity.csv
"""
import argparse
from pathlib import Path

from stmkit.evaluation import results_to_csv, sweep_sparsity
from stmkit.synthgen import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=300)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--K", type=int, default=10)
    ap.add_argument("--N", type=int, default=500)
    ap.add_argument("--etas", type=float, nargs="+", default=[0.0, 0.3, 0.6, 0.9])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", default="results/sparsity.csv")
    args = ap.parse_args()

    cfg = SynthConfig(p=args.p, n=args.n, K=args.K, N=args.N, seed=args.seed)
    results = sweep_sparsity(cfg, args.etas, args.reps, threads=args.threads)
    for r in results:
        print(f"eta={r.grid_value:.2f}  loss={r.mean_loss:.4f} (sd {r.sd_loss:.4f})  "
              f"nonzero={r.sparsity:.3f}  failed={r.failed}  violations={r.violations}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(results_to_csv(results))


if __name__ == "__main__":
    main()
