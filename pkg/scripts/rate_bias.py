"""Measure the mini-batch estimator's bias on the default rate-check pair
with many replications, to separate bias from sampling noise.

    python3 scripts/rate_bias.py --reps 5000 --batch-sizes 16 64 256
"""

import argparse

from pct.config import default_config
from pct.evaluation import batch_ablation
from pct.experiments import DISTORTIONS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5000)
    ap.add_argument("--batch-sizes", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--seed", type=int, default=123, help="replication stream seed")
    args = ap.parse_args()
    cfg = default_config("rate_check")
    teacher = cfg.dataset.build(cfg.seed).points
    teacher = teacher - teacher.mean(axis=0)
    student = DISTORTIONS[cfg.options.distortion](teacher)
    rows = batch_ablation(teacher, student, ("euclidean", "euclidean"), args.batch_sizes, args.reps, args.seed)
    exact = rows[-1].pc
    print(f"exact pc {exact!r}")
    print("batch_size,pc_estimate,stderr,bias,bias_in_stderr")
    for r in rows[:-1]:
        print(f"{r.batch_size},{r.pc:.6f},{r.stderr:.6f},{r.pc - exact:+.6f},{(r.pc - exact) / r.stderr:+.1f}")


if __name__ == "__main__":
    main()
