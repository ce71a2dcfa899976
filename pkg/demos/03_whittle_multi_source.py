"""Two sources sharing one channel: Whittle index tables and an indexability check."""

import numpy as np

from freshsched.multi_source import Arm, build_whittle_table, indexability_diagnostic, source_arms, whittle_decide
from freshsched.penalty import dip_penalty, monotone_penalty, service_constant

arms = (source_arms(0, dip_penalty(), service_constant(1), weight=5.0, offsets=range(30))
        + source_arms(1, monotone_penalty(), service_constant(4), weight=1.0, offsets=range(30)))
table = build_whittle_table(arms)

for aoi in ([3, 10], [20, 10], [40, 2], [2, 40]):
    print(f"AoI {aoi} ->", whittle_decide(table, aoi, channel_idle=True))

rep = indexability_diagnostic(Arm(0, 0, 1.0, dip_penalty().scaled(100), service_constant(1)),
                              np.round(np.arange(0, 5.0001, 0.5), 10))
print("\nbeta_bar over lambda 0..5:", " ".join(f"{b:.3f}" for b in rep.beta_bar))
print("indexable:", rep.indexable)
