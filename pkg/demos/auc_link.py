"""Which Gaussian formula predicts the AUC of a Fisher discriminant?

For two Gaussian classes with shared covariance and Mahalanobis distance d_M,
the Fisher score is normal in each class with means +-d_M^2/2 and variance
d_M^2. Thresholding at the midpoint gives balanced accuracy Phi(d_M/2); the
ROC-AUC of the score is Phi(d_M/sqrt 2). This demo measures both.

    python3 demos/auc_link.py
"""

import numpy as np

from spectral_lab.matrix import center, covariance, eig_sym
from spectral_lab.diagnostics import class_contrast
from spectral_lab.separation import fisher_direction, fisher_score_auc, gaussian_auc, roc_auc
from spectral_lab.synthlab import SyntheticSpec, sample


def main() -> None:
    print(f"{'d_M':>4}  {'Phi(d/2)':>8}  {'balanced acc':>12}  {'Phi(d/sqrt2)':>12}  {'ROC-AUC':>8}")
    for d_m in (0.5, 1.0, 2.0, 3.0):
        spec = SyntheticSpec(D=16, beta=1.0, signal=(d_m,))
        train, test = sample(spec, 40_000, 0), sample(spec, 40_000, 0, 1)
        s = eig_sym(covariance(center(train, by_class=True)))
        w = fisher_direction(s, class_contrast(train, 1))
        scores = test.data @ w
        pos, neg = test.labels == 1, test.labels == 0
        cut = 0.5 * (train.data[train.labels == 1].mean(0) + train.data[train.labels == 0].mean(0)) @ w
        balanced = 0.5 * (np.mean(scores[pos] > cut) + np.mean(scores[neg] <= cut))
        d2 = d_m**2
        print(f"{d_m:>4.1f}  {gaussian_auc(d2):>8.4f}  {balanced:>12.4f}  {fisher_score_auc(d2):>12.4f}  "
              f"{roc_auc(scores[pos], scores[neg]):>8.4f}")


if __name__ == "__main__":
    main()
