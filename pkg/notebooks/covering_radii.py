"""
Covering radii, minima and the volume inequality for a few small fields.
"""

from towerdomains.lattice import LatticeInstance, covering_radius_small
from towerdomains.voronoi import FieldSpec, field_report

## Small fields
fields = [
    FieldSpec.multiquadratic(),
    FieldSpec.multiquadratic(-1),
    FieldSpec.cyclotomic(3),
    FieldSpec.multiquadratic(5),
    FieldSpec.cyclotomic(5),
    FieldSpec.cyclotomic(8),
    FieldSpec.cyclotomic(12),
]
for fld in fields:
    rep = field_report(fld)
    print(f"{rep.name:14s} n={rep.n} mu^2={rep.mu_squared[1]} min^2={rep.shortest_l2_squared} "
          f"volume ok={rep.volume.holds}")

## Exact versus bounds mode on D4
d4 = LatticeInstance.from_basis([[1, 1, 0, 0], [1, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1]])
exact = covering_radius_small(d4, mode="exact")
bounds = covering_radius_small(d4, mode="bounds")
print("D4 exact mu^2:", exact.squared_upper, "relevant vectors:", len(exact.relevant_vectors))
print("D4 bounds:", bounds.squared_lower, "<= mu^2 <=", bounds.squared_upper)
