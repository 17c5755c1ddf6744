"""Command line entry point ``gmc-lab``."""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, StudyConfig, StudyKind, run_study


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gmc-lab", description="GFF / chaos-measure verification studies")
    ap.add_argument("study", choices=[k.value for k in StudyKind])
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--out", help="output directory (default: gmc-lab-<study>)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    text = None
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    try:
        cfg = StudyConfig.from_ini(text, kind=args.study, seed=args.seed, replicas=args.replicas,
                                   gamma=args.gamma, out_dir=args.out)
    except ConfigError as exc:
        print(f"gmc-lab: config error: {exc}", file=sys.stderr)
        return 2
    if cfg.out_dir is None:
        cfg.out_dir = f"gmc-lab-{cfg.kind.value}"
    rep = run_study(cfg)
    for m in rep.metrics:
        print(f"{'PASS' if m.passed else 'FAIL'}  {m.id}  estimate={m.estimate:.6g}"
              + (f"  target={m.target:.6g}" if m.target is not None else "")
              + (f"  tol={m.ci_halfwidth:.3g}" if m.ci_halfwidth is not None else ""))
    print(f"{'all metrics pass' if rep.passed else 'some metrics fail'}; report in {cfg.out_dir}/report.json")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
