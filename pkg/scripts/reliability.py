"""Bob's and Willie's decoding error addends along the n grid of a config."""

import argparse
from pathlib import Path

from covertcast.config import load_config
from covertcast.experiments import ADDENDS, run_reliability

DEFAULT = Path(__file__).resolve().parents[1] / "configs" / "default.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(DEFAULT))
    ap.add_argument("--trials", type=int)
    args = ap.parse_args()

    cfg = load_config(args.config).with_overrides(trials=args.trials)
    rows, _ = run_reliability(cfg)
    print(f"{'n':>6} {'M1':>4} {'M2':>3} " + " ".join(f"{a:>14}" for a in ADDENDS))
    for r in rows:
        if r["status"] != "ok":
            print(f"{r['n']:6d}  infeasible: {r['message']}")
            continue
        cells = " ".join(f"{r[a]:7.4f}+-{r[a + '_se']:.3f}" for a in ADDENDS)
        print(f"{r['n']:6d} {r['M1']:4d} {r['M2']:3d} {cells}")


if __name__ == "__main__":
    main()
