#!/usr/bin/env python3
"""Communication scaling of the three protocols, from the closed-form
byte meters (hardware-independent, matches the simulator exactly).

Shows the two structural effects the protocols are built around:
  - share-vector traffic grows with the model size m, so the plain
    share-everything protocol pays O(n^2 * m/k) bytes per round;
  - the LWE variant's secret-sharing traffic depends only on the fixed
    secret dimension, so growing m only grows the masked broadcasts.

Run: python demos/scaling_trends.py
"""

from secaggsim import RoundConfig
from secaggsim.masking import DH_GROUP_TEST, LweParams
from secaggsim.simnet import meter_expectations

print(f"{'m':>9} | {'nv bytes':>12} | {'lwe bytes':>12} | {'lwe s-share':>12}"
      f" | {'pw bytes':>12}")
print("-" * 70)
for m in (10, 100, 1000, 10_000, 100_000, 1_000_000):
    nv = meter_expectations(RoundConfig(protocol="nv", n=10, m=m))
    lwe_cfg = RoundConfig(protocol="lwe", n=10, m=m, lwe=LweParams())
    lwe = meter_expectations(lwe_cfg)
    pw = meter_expectations(RoundConfig(protocol="pw", n=10, m=m,
                                        dh=DH_GROUP_TEST))
    s_share = (lwe["per_stage"]["secret_shares"]["bytes_sent"]
               + lwe["per_stage"]["sum_shares"]["bytes_sent"])
    print(f"{m:>9} | {nv['totals']['bytes']:>12} | {lwe['totals']['bytes']:>12}"
          f" | {s_share:>12} | {pw['totals']['bytes']:>12}")

print("\nmessage counts stay on the n(n-1) full-mesh pattern:")
for n in (10, 100, 1000):
    nv = meter_expectations(RoundConfig(protocol="nv", n=n, m=100))
    print(f"  n={n:>4}: nv messages = {nv['totals']['messages']}"
          f" (= 2*n*(n-1) + n control)")
