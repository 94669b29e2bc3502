"""Degradation sweep on synthetic eyes: EER per factor with bicubic reconstruction.

    python scripts/run_fixture_experiment.py --out sweep_out --factors 1 2 4 8 16
"""

import argparse
import os

from irissr.cli.config import EngineSpec, ExperimentConfig
from irissr.cli.fixtures import write_eye_fixtures
from irissr.cli.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="sweep_out")
    ap.add_argument("--subjects", type=int, default=20)
    ap.add_argument("--samples", type=int, default=4)
    ap.add_argument("--factors", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    ap.add_argument("--matchers", nargs="+", default=["gabor", "qsw"])
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--fsim", action="store_true", help="also compute FSIM (slow)")
    args = ap.parse_args()

    paths = write_eye_fixtures(os.path.join(args.out, "eyes"), args.subjects, args.samples, seed=args.seed)
    cfg = ExperimentConfig(engines=[EngineSpec("bicubic")], factors=args.factors, matchers=args.matchers,
                           enroll=paths["enroll"], probe=paths["probe"], out=args.out, seed=args.seed,
                           with_fsim=args.fsim)
    res = run_experiment(cfg)
    for row in res.rows:
        print(f"x{row.factor:<3d} {row.matcher:6s} EER {row.eer:.4f}")
    print(f"report: {res.report_path}")


if __name__ == "__main__":
    main()
