"""Two-class mixture: test error against the Bayes error, and sparsity.

    python scripts/twoclass_experiment.py --seeds 5
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from vrvm.classification import fit_classification
from vrvm.datasets import bayes_error, gen_two_class
from vrvm.kernels import KernelSpec
from vrvm.regression import FitConfig, relevance_vectors


@dataclass
class TwoClassConfig:
    seeds: int = 5
    n_train: int = 100
    n_test: int = 10000
    width: float = 0.5
    convention: str = "r2"
    tol: float = 1e-6
    max_iter: int = 500
    thresholds: str = "1e-3,1e-2,1e-1,1"


def parse_args(argv=None) -> TwoClassConfig:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for f in fields(TwoClassConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    return TwoClassConfig(**vars(p.parse_args(argv)))


def main(argv=None):
    cfg = parse_args(argv)
    thresholds = [float(t) for t in cfg.thresholds.split(",")]
    bayes = bayes_error()
    print(f"config: {asdict(cfg)}")
    print(f"Bayes error of the mixture: {100 * bayes:.3f}%")
    kernel = KernelSpec("gaussian", width=cfg.width, convention=cfg.convention)
    errors = []
    for seed in range(cfg.seeds):
        train = gen_two_class(cfg.n_train, seed=2 * seed)
        test = gen_two_class(cfg.n_test, seed=2 * seed + 1)
        model, report = fit_classification(train.X, train.t, kernel,
                                           config=FitConfig(tol=cfg.tol, max_iter=cfg.max_iter))
        err = float(np.mean(model.predict(test.X) != test.t))
        errors.append(err)
        counts = " ".join(f"count@{th:g}={relevance_vectors(model, th)[1]}" for th in thresholds)
        print(f"seed={seed} error={100 * err:.2f}% sweeps={report.n_iterations} "
              f"converged={report.converged} {counts}")
    print(f"mean error {100 * np.mean(errors):.2f}% (Bayes {100 * bayes:.2f}%)")


if __name__ == "__main__":
    sys.exit(main())
