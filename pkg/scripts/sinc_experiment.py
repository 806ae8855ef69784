"""Noisy-sinc regression over many seeds with k-fold width selection.

    python scripts/sinc_experiment.py --seeds 25 --out sinc_runs.csv
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from vrvm.datasets import cross_validate_width, gen_sinc, sinc
from vrvm.kernels import KernelSpec
from vrvm.regression import FitConfig, fit_regression, relevance_vectors


@dataclass
class SincConfig:
    seeds: int = 25
    n: int = 50
    noise: float = 0.1
    widths: str = "0.5,1,2,3,5,8"
    k: int = 5
    convention: str = "r2"
    tol: float = 1e-6
    max_iter: int = 500
    thresholds: str = "1e-3,1e-2,1e-1"
    out: str = ""


def parse_args(argv=None) -> SincConfig:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for f in fields(SincConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    return SincConfig(**vars(p.parse_args(argv)))


def run(cfg: SincConfig):
    widths = [float(w) for w in cfg.widths.split(",")]
    thresholds = [float(t) for t in cfg.thresholds.split(",")]
    grid = np.linspace(-10, 10, 1001)[1:-1, None]
    fit_cfg = FitConfig(tol=cfg.tol, max_iter=cfg.max_iter)
    rows = []
    for seed in range(cfg.seeds):
        ds = gen_sinc(cfg.n, cfg.noise, seed=seed)
        base = KernelSpec("gaussian", width=1.0, convention=cfg.convention)
        cv = cross_validate_width(ds, widths, k=cfg.k, seed=seed, kernel=base, config=fit_cfg)
        kernel = KernelSpec("gaussian", width=cv.best_width, convention=cfg.convention)
        model, report = fit_regression(ds.X, ds.t, kernel, config=fit_cfg)
        mean, _ = model.predict(grid)
        row = {"seed": seed, "width": cv.best_width,
               "rms_true": float(np.sqrt(np.mean((mean - sinc(grid[:, 0])) ** 2))),
               "noise_std": report.noise_std_estimate, "sweeps": report.n_iterations,
               "converged": report.converged}
        for th in thresholds:
            row[f"count@{th:g}"] = relevance_vectors(model, th)[1]
        rows.append(row)
        print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return rows


def main(argv=None):
    cfg = parse_args(argv)
    start = time.perf_counter()
    rows = run(cfg)
    print(f"\nconfig: {asdict(cfg)}")
    for key in rows[0]:
        if key not in ("seed", "converged"):
            print(f"mean {key} = {np.mean([r[key] for r in rows]):.4f}")
    print(f"elapsed {time.perf_counter() - start:.1f}s")
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
