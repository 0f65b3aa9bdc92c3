"""Common-line detection accuracy and downstream reconstruction versus noise."""

import argparse
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from commonlines.projection import DEFAULT_N_R, DEFAULT_N_THETA, DEFAULT_R_MAX, default_phantom, detect_common_lines, simulate_slices
from commonlines.spectral import IntrinsicDimensionWarning, reconstruct
from commonlines.sphere import sample_uniform

log = logging.getLogger("detection")


@dataclass
class DetectionConfig:
    n: int = 50
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    snrs: list = field(default_factory=lambda: [math.inf, 1000.0, 100.0, 16.0, 4.0])
    n_theta: int = DEFAULT_N_THETA
    n_r: int = DEFAULT_N_R
    r_max: float = DEFAULT_R_MAX


def run_one(cfg, seed, snr):
    ds = sample_uniform(cfg.n, seed)
    slices = simulate_slices(default_phantom(seed), ds, cfg.n_theta, cfg.n_r, cfg.r_max, snr=snr, seed=seed)
    datum, result = detect_common_lines(slices)
    result.attach_truth(ds)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntrinsicDimensionWarning)
        _, model, report = reconstruct(datum, ds)
    summary = result.summary()
    return {
        "within_one_bin": summary["fraction_within_one_bin"],
        "median_line_error_deg": math.degrees(summary["median_error"]),
        "dim": model.dim,
        "direction_error_deg": report.mean_angular_error_deg,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=DetectionConfig.n)
    parser.add_argument("--seeds", type=int, nargs="+", default=DetectionConfig().seeds)
    parser.add_argument("--snrs", type=float, nargs="+", default=DetectionConfig().snrs, help="inf means no noise")
    parser.add_argument("--n-theta", type=int, default=DEFAULT_N_THETA)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = DetectionConfig(args.n, args.seeds, args.snrs, args.n_theta)
    log.info("config %s", asdict(cfg))
    for snr in cfg.snrs:
        runs = [run_one(cfg, seed, snr) for seed in cfg.seeds]
        errs = [r["direction_error_deg"] for r in runs if r["direction_error_deg"] is not None]
        log.info(
            "snr=%-6s within-one-bin %.3f  median line error %.2f deg  dims %s  direction error %s",
            snr,
            np.mean([r["within_one_bin"] for r in runs]),
            np.median([r["median_line_error_deg"] for r in runs]),
            [r["dim"] for r in runs],
            f"{np.mean(errs):.2f} deg" if errs else "n/a",
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
