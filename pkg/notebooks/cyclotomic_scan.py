"""
Root discriminants of cyclotomic fields against (1 - eps) log phi(m).
"""

from fractions import Fraction

import numpy as np

from towerdomains.voronoi import cyclo_log_root_disc, cyclo_scan

## A few exact formulas
for m in (3, 4, 12, 60, 2310):
    lrd = cyclo_log_root_disc(m)
    print(m, [(p, str(c)) for p, _, c in lrd.terms], lrd.value(64))

## The scan
scan = cyclo_scan(20000, Fraction(1, 10), workers=2)
print("exceptional m:", scan.exceptional)
print("largest failing m:", scan.max_failing)

## Margin statistics (floats, display only)
margin = np.array([float(r.log_delta.mid - r.threshold.mid) for r in scan.rows[1:]])
print("smallest margin among holds:", margin[margin > 0].min())
print("mean margin:", margin.mean())
