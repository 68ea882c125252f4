"""Feed exact population moments through the estimator and report ||A_hat - A||_1."""
import argparse
import time

import numpy as np

from stmkit.estimator import recover_from_population
from stmkit.model import AnchorPartition, TopicMatrix, WeightMatrix, population_moments


def random_instance(rng, p, K, n, m):
    A = np.zeros((p, K))
    for k in range(K):
        A[k * m:(k + 1) * m, k] = rng.uniform(0.05, 0.2, size=m)
    A[K * m:] = rng.uniform(size=(p - K * m, K))
    A /= A.sum(axis=0)
    W = rng.dirichlet(np.full(K, 0.5), size=n).T
    groups = tuple(tuple(range(k * m, (k + 1) * m)) for k in range(K))
    return TopicMatrix(A), WeightMatrix(W), AnchorPartition(groups)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--anchors-per-topic", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    errs = []
    for _ in range(args.instances):
        A, W, anchors = random_instance(rng, args.p, args.K, args.n, args.anchors_per_topic)
        A_hat, _, _ = recover_from_population(population_moments(A, W), anchors)
        errs.append(np.abs(A_hat.entries - A.entries).sum())
    print(f"{args.instances} instances, max l1 error {max(errs):.3e}, {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
