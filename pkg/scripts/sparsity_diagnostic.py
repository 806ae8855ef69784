"""How the relevance count depends on sweep budget and on the threshold.

Fits one dataset with increasing max_iter (no early stop) and prints the
number of kernel weights above several thresholds, plus the magnitude
quantiles of the weights that are not clearly relevant.

    python scripts/sparsity_diagnostic.py --task regression --seed 0
    python scripts/sparsity_diagnostic.py --task classification --width 0.5
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields

import numpy as np

from vrvm.classification import fit_classification
from vrvm.datasets import gen_sinc, gen_two_class
from vrvm.kernels import KernelSpec
from vrvm.regression import FitConfig, fit_regression, relevance_vectors


@dataclass
class DiagnosticConfig:
    task: str = "regression"
    seed: int = 0
    width: float = 3.0
    budgets: str = "500,2000,10000"
    thresholds: str = "1e-3,3e-3,1e-2,1e-1,1"
    b: float = 1e-6


def parse_args(argv=None) -> DiagnosticConfig:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for f in fields(DiagnosticConfig):
        p.add_argument(f"--{f.name}", type=type(f.default), default=f.default)
    return DiagnosticConfig(**vars(p.parse_args(argv)))


def main(argv=None):
    cfg = parse_args(argv)
    from vrvm.special import HyperpriorConfig

    hp = HyperpriorConfig(b=cfg.b)
    if cfg.task == "regression":
        ds, fit = gen_sinc(50, 0.1, seed=cfg.seed), fit_regression
    else:
        ds, fit = gen_two_class(100, seed=cfg.seed), fit_classification
    kernel = KernelSpec("gaussian", width=cfg.width)
    thresholds = [float(t) for t in cfg.thresholds.split(",")]
    print(f"{cfg.task} seed={cfg.seed} width={cfg.width} b={cfg.b}  (sqrt(2b)={np.sqrt(2 * cfg.b):.2e})")
    for budget in (int(b) for b in cfg.budgets.split(",")):
        model, report = fit(ds.X, ds.t, kernel, hp, FitConfig(tol=0.0, max_iter=budget))
        post = model.posterior
        w = np.abs((post.mu_w if hasattr(post, "mu_w") else post.m)[1:])
        counts = " ".join(f"@{th:g}:{relevance_vectors(model, th)[1]}" for th in thresholds)
        small = np.sort(w[w < 0.1])
        q = np.quantile(small, [0.1, 0.5, 0.9]) if len(small) else [np.nan] * 3
        print(f"sweeps={budget:6d} L={report.elbo_trace[-1]:.6f} counts {counts}  "
              f"|w|<0.1 quantiles 10/50/90%: {q[0]:.1e} {q[1]:.1e} {q[2]:.1e}")


if __name__ == "__main__":
    sys.exit(main())
