"""Rescaled-time trajectories of the 3- and 4-trait fixtures with their limit profiles."""

import argparse
from pathlib import Path

import numpy as np

from tstsim import fixtures
from tstsim.limit import limit_profile_for
from tstsim.ode import OdeSystemSpec, integrate


def run(make, eps: float, horizon: float):
    model = make(eps)
    profile = limit_profile_for(model)
    scale = np.log(1 / eps)
    traj = integrate(OdeSystemSpec(model), horizon * profile.switch_times[-1] * scale, tol=1e-10)
    return model, profile, traj, scale


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--horizon", type=float, default=1.3, help="multiple of the last switch time")
    p.add_argument("--out", default="substitution_panels")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    panels = [run(f, args.eps, args.horizon) for f in (fixtures.three_trait, fixtures.four_trait)]
    for (model, profile, traj, scale), name in zip(panels, ("three", "four")):
        traj.to_csv(out / f"{name}_trait.csv")
        (out / f"{name}_trait_profile.json").write_text(profile.to_json() + "\n")
        print(name, "final", np.round(traj.final, 8), "profile", profile.final)

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; wrote CSV only")
        return
    fig, axes = plt.subplots(2, 1, figsize=(7, 7), sharex=False)
    for ax, (model, profile, traj, scale) in zip(axes, panels):
        for col, tid in enumerate(traj.trait_ids):
            ax.plot(traj.times / scale, traj.states[:, col], label=f"x{tid}")
        for t in profile.switch_times[1:]:
            ax.axvline(t, color="grey", lw=0.5, ls=":")
        ax.set_xlabel("t / ln(1/eps)")
        ax.set_ylabel("density")
        ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out / "substitution_panels.png", dpi=150)
    print("wrote", out / "substitution_panels.png")


if __name__ == "__main__":
    main()
