"""Run the toy configuration transfers over several seeds and tabulate the
final coherence and mean row Spearman (the numbers behind the toy thresholds).

    python3 scripts/seed_sweep.py --seeds 0 1 2 3 4 --out runs/seed_sweep
"""

import argparse
import json
from pathlib import Path

from pct.cli import main as pct_main
from pct.reporting import read_results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--experiments", nargs="+", default=["toy2d", "toy3d"])
    ap.add_argument("--out", default="runs/seed_sweep")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print("experiment,seed,global_phi,mean_row_spearman,pass")
    for exp in args.experiments:
        cfg = out / f"{exp}.json"
        cfg.write_text(json.dumps({"experiment": exp}))
        for seed in args.seeds:
            run_dir = out / f"{exp}_s{seed}"
            if pct_main(["run", str(cfg), "--out", str(run_dir), "--seed", str(seed)]) != 0:
                raise SystemExit(f"{exp} seed {seed} failed")
            rows = {r.metric: r.value for r in read_results(run_dir / "results.csv") if not r.meta}
            phi, rho = rows["global_phi"], rows["mean_row_spearman"]
            print(f"{exp},{seed},{phi:.4f},{rho:.4f},{int(phi >= 0.9 and rho >= 0.9)}", flush=True)


if __name__ == "__main__":
    main()
