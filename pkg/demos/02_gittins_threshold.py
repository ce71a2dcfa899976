"""Single source: Gittins index, threshold roots per buffer offset, and a value-iteration cross-check."""

from freshsched.gittins import gittins_table
from freshsched.penalty import dip_penalty, service_lognormal_discretized
from freshsched.single_source import mdp_oracle_average_cost, optimal_buffer_offset, threshold_roots

p = dip_penalty()
S = service_lognormal_discretized(1.2, 0.9)
gt = gittins_table(p, S)
print("penalty minimum at", int(p.table.argmin()), "| service mean", round(S.mean, 3), "T_max", S.t_max)
print("gamma(delta) for delta = 0, 5, ..., 60:")
print(" ".join(f"{gt(d):.3f}" for d in range(0, 61, 5)))

B = 30
roots = threshold_roots(p, S, B, gt)
b, beta = optimal_buffer_offset(p, S, B, gt)
print(f"\nbeta_0 (fresh sample only) = {roots[0]:.5f}")
print(f"best offset b* = {b}, beta* = {beta:.5f}")

res = mdp_oracle_average_cost(p, S, 8)
print(f"value iteration with B=8: {res.gain:.10f} vs {threshold_roots(p, S, 8, gt).min():.10f}")
