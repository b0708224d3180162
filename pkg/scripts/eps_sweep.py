"""Crossing times against the limit profile over a sweep of migration scales."""

import argparse
import json
from pathlib import Path

from tstsim import fixtures
from tstsim.config import parse_config
from tstsim.limit import limit_profile_for, verify_convergence


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", help="model JSON; defaults to the canonical 3-trait model")
    p.add_argument("--eps", type=float, nargs="+", default=[1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    p.add_argument("--eta", type=float)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="eps_sweep")
    args = p.parse_args()

    model = parse_config(Path(args.config).read_text(), env={})[0] if args.config else fixtures.canonical()
    profile = limit_profile_for(model, require_assumptions=False)
    rep = verify_convergence(model, profile, args.eps, args.eta, args.tol, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / "convergence.csv")
    rep.slopes_to_csv(out / "slopes.csv")
    (out / "profile.json").write_text(profile.to_json() + "\n")

    print(f"{'eps':>8} {'event':>10} {'predicted':>9} {'measured':>9} {'rel':>8}")
    for r in rep.rows:
        print(f"{r.epsilon:8.0e} {r.label:>10} {r.predicted:9.4f} {r.measured:9.4f} {r.rel_error:+8.4f}")
    print("\nslope estimates (increment of crossing time per unit ln(1/eps))")
    for s in rep.slopes:
        print(f"{s.eps_a:8.0e}->{s.eps_b:<8.0e} {s.label:>10} {s.predicted:9.4f} {s.slope:9.4f} {s.rel_error:+8.4f}")
    print(json.dumps({"monotone": rep.monotone}))


if __name__ == "__main__":
    main()
