"""
Walk through a two-step tower: find a unit, build N, and reduce points into
the explicit fundamental domain.
"""

import random

from towerdomains.domain import bound_report, build_domain, domain_radii, index_in_ON, reduce_point
from towerdomains.field import TowerDescriptor
from towerdomains.unramified import build_tower, root_discriminant_data, unit_search

## Searching for units w
# L = Q(√5, √41); candidates are ±products of (2-saturated) subfield units
base = TowerDescriptor((5, 41))
found = unit_search(base)
print("candidates tried:", found.candidates)
print("filter survivors:", found.passed)
for w in found:
    print("w =", w)

## The tower N = L(√w)
tower = build_tower((5, 41), found.units)
print(tower)
print(root_discriminant_data(tower))

## The domain
dom = build_domain(tower)
for t, g in enumerate(dom.g):
    print(f"T={t}: h_T/q_T = {g}")
print("index of O_{N,eps} in O_N:", index_in_ON(dom))

radii = domain_radii(dom)
print("radii (L2, Linf):", radii.l2, radii.linf)

## Reducing random points
rng = random.Random(0)
for _ in range(3):
    alpha = tower.random_element(rng, height=30, den=4)
    res = reduce_point(dom, alpha)
    print("shift coordinates:", [k for k in res.shift_coords.values()])
    assert alpha == res.residue + res.shift

## Exponent report
rep = bound_report(dom)
print(dict(zip(["n", "log_n_l2", "log_n_linf", "eps_hat"], [rep.n, rep.log_n_l2, rep.log_n_linf, rep.eps_hat])))
