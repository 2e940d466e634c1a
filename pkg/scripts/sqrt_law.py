"""Square-root-law signature: covert-process KL and log M1 / sqrt(n KL) along the n grid.

Under alpha_n = a / sqrt(n) the divergence stays flat while the n^(-1/4)
control schedule lets it grow; the throughput ratio sits between the
resolvability floor and the reliability ceiling.
"""

import argparse
from pathlib import Path

from covertcast.config import load_config
from covertcast.experiments import run_scaling

DEFAULT = Path(__file__).resolve().parents[1] / "configs" / "default.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(DEFAULT))
    ap.add_argument("--n-grid", default=None, help="comma-separated override, e.g. 500,1000,4000,16000")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.n_grid:
        cfg = cfg.with_overrides(n_grid=tuple(int(v) for v in args.n_grid.split(",")))
    rows = [r for r in run_scaling(cfg) if r["status"] == "ok"]
    band = rows[0]["band_low"], rows[0]["band_high"]
    print(f"band [{band[0]:.4f}, {band[1]:.4f}]")
    print(f"{'schedule':>12} {'t':>4} {'n':>7} {'alpha':>9} {'KL':>9} {'log M1':>10} {'ratio':>7}")
    for r in rows:
        print(f"{r['schedule']:>12} {r['t_rate']:4.1f} {r['n']:7d} {r['alpha']:9.5f} {r['kl']:9.4f} "
              f"{r['log_m1']:10.2f} {r['ratio']:7.4f}")
    for label in ("sqrt", "neg_control"):
        kls = [r["kl"] for r in rows if r["schedule"] == label and r["t_rate"] == rows[0]["t_rate"]]
        print(f"{label}: KL max/min = {max(kls) / min(kls):.3f}")


if __name__ == "__main__":
    main()
