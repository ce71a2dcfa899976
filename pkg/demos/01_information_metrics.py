"""How stale can a feature be before a predictor gets worse?

Builds two small Markov sources, prints the error-vs-AoI curve under a few
losses, and shows that a label lagging the feature by two slots makes a
two-slot-old feature the best one to have.
"""

import numpy as np

from freshsched import info_metrics as im

markov = im.ChainModel(np.array([[0.8, 0.15, 0.05], [0.1, 0.7, 0.2], [0.3, 0.3, 0.4]]))
lagged = im.ChainModel.symmetric_binary(0.1, label_delay=2)

for loss in (im.LogLoss(), im.BrierLoss(), im.ZeroOneLoss()):
    curve = im.freshness_curve(markov, loss, 6)
    print(f"{str(loss):>10}  markov  ", " ".join(f"{v:.4f}" for v in curve.values))

dec = im.markov_decomposition(lagged, im.ZeroOneLoss(), 6)
print("\nlabel lags by 2 slots (0-1 loss)")
print("theta   value     g1       g2     eps")
for theta, (v, g1, g2, eps) in enumerate(zip(dec.direct.values, dec.g1, dec.g2, im.lag_epsilons(lagged, 6))):
    print(f"{theta:5d}  {v:.4f}  {g1:.4f}  {g2:.4f}  {eps:.4f}")

# a random AoI: spreading theta around the dip costs accuracy
fresh = im.Distribution.point_mass(2, range(7))
spread = im.Distribution.from_masses([0.2, 0.2, 0.2, 0.2, 0.2, 0, 0])
print("\nE[error] at theta=2:", dec.direct.averaged(fresh), " uniform 0..4:", round(dec.direct.averaged(spread), 4))
