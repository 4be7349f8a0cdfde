#!/usr/bin/env python3
"""Regenerate data/bundled_200.libsvm: 200 samples, 50 features, roughly 30%
dense, labels from a noisy planted logistic model."""
import sys

import numpy as np

N, n, density = 200, 50, 0.3


def main(path):
    rng = np.random.default_rng(20240611)
    w = rng.standard_normal(n)
    with open(path, "w") as out:
        for _ in range(N):
            mask = rng.random(n) < density
            if not mask.any():
                mask[rng.integers(n)] = True
            x = np.where(mask, np.round(rng.standard_normal(n), 4), 0.0)
            p = 1.0 / (1.0 + np.exp(-x @ w))
            label = "+1" if rng.random() < p else "-1"
            feats = " ".join(f"{i + 1}:{x[i]:g}" for i in range(n) if mask[i])
            out.write(f"{label} {feats}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/bundled_200.libsvm")
