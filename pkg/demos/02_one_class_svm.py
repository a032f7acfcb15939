"""Train a one-class SVM on background superpixels and classify the rest."""

import numpy as np

from bbinit.metrics import iou
from bbinit.ocsvm import OcsvmConfig, decision_function, ocsvm_segment, train_ocsvm
from bbinit.synthetic import square_scene

# nu bounds the share of training points left outside the support
X = np.random.default_rng(0).standard_normal((500, 2))
for nu in (0.1, 0.3, 0.5):
    m = train_ocsvm(X, nu, 0.5)
    outside = (decision_function(m, X) < 0).mean()
    print(f"nu {nu}: outside {outside:.3f}, support vectors {len(m.alphas) / 500:.3f}")

# on a scene, superpixels unlike the background become the object
frame, bbox, gt = square_scene(40)
for feature in ("rgb", "lab", "sift", "lbp"):
    mask = ocsvm_segment(frame, bbox, OcsvmConfig(feature=feature, nu=0.1, gamma=1.0))
    print(f"{feature:>4}: IoU {iou(gt, mask):.3f}")
