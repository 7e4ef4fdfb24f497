"""Run the survey engine at several lambdas from one base config and report
where end-to-end certification succeeds.

    python scripts/lambda_sweep.py configs/potts_d2_lambda068.cfg 0.67 0.68 0.69
"""

import argparse
import dataclasses
import time
from pathlib import Path

from survey_recon.cli import build_model, build_schedule
from survey_recon.config import load_config, parse_value
from survey_recon.core import decimal_string
from survey_recon.potts_certify import end_to_end_certify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("lambdas", nargs="+")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--iterations", type=int, help="override [schedule] iterations")
    args = ap.parse_args()

    config, _ = load_config(args.config)
    base_dir = Path(args.config).resolve().parent
    if args.iterations is not None:
        config = dataclasses.replace(config, schedule=dataclasses.replace(config.schedule, iterations=args.iterations))
    schedule = build_schedule(config, base_dir)
    print("lambda,certified,iterations,x_hat,C,seconds")
    for lam in args.lambdas:
        model = build_model(dataclasses.replace(config, model=dataclasses.replace(config.model, lam=parse_value(lam))))
        t0 = time.perf_counter()
        cert, result = end_to_end_certify(model, schedule, config.certify.m, workers=args.workers)
        print(
            f"{lam},{cert.certified},{result.iterations},{decimal_string(cert.problem.x_hat, 6)},"
            f"{decimal_string(cert.factor, 6)},{time.perf_counter() - t0:.1f}",
            flush=True,
        )


if __name__ == "__main__":
    main()
