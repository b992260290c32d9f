"""Sweep the stylized two-moon study over seeds and a few knobs and print the
teacher accuracy, probe-accuracy range and Pearson correlation per run.

Used to check how the probe accuracies relate to a perfect teacher.

    python3 scripts/stylized_sweep.py --seeds 0 1 2 3 4
"""

import argparse
import itertools

from pct.transfer import StylizedConfig, SupervisedConfig, stylized_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--noise", type=float, nargs="+", default=[0.1, 0.2, 0.3])
    ap.add_argument("--teacher-batch", type=int, nargs="+", default=[32, 400])
    ap.add_argument("--probe-epochs", type=int, nargs="+", default=[5, 20])
    args = ap.parse_args()
    print("noise,teacher_batch,probe_epochs,seed,teacher_test,probe_min,probe_max,pearson_r")
    for noise, tb, pe, seed in itertools.product(args.noise, args.teacher_batch, args.probe_epochs, args.seeds):
        cfg = StylizedConfig(noise=noise, teacher=SupervisedConfig(200, tb), probe=SupervisedConfig(pe, 32))
        r = stylized_study(seed, cfg)
        print(f"{noise},{tb},{pe},{seed},{r.teacher_test_accuracy:.4f},{min(r.accuracy):.4f},"
              f"{max(r.accuracy):.4f},{r.pearson_r:.3f}", flush=True)


if __name__ == "__main__":
    main()
