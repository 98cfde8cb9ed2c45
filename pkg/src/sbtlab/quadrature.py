"""Composite Gauss-Legendre rules graded toward a near-singular point."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class QuadratureSpec:
    base_panels: int = 8          # panels per unit length away from the near point
    refinement_levels: Optional[int] = None   # None: grade all the way down to the distance
    nodes_per_panel: int = 16
    theta_nodes: int = 64

    def __post_init__(self):
        for name in ("base_panels", "nodes_per_panel", "theta_nodes"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"quadrature {name} must be >= 1")
        if self.refinement_levels is not None and self.refinement_levels < 1:
            raise InputError("quadrature refinement_levels must be >= 1")
        if self.nodes_per_panel > 64:
            raise InputError("nodes_per_panel is capped at 64")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        allowed = set(cls.__dataclass_fields__)
        extra = set(doc) - allowed
        if extra:
            raise InputError(f"unknown key {sorted(extra)[0]!r} in quadrature")
        return cls(**doc)


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def graded_edges(center, delta, lo, hi, base_width):
    """Panel edges on [lo, hi] doubling in width away from ``center``."""
    edges = [center]
    for sign, end in ((1.0, hi), (-1.0, lo)):
        side = []
        reach = abs(end - center)
        if reach <= 0:
            continue
        width = min(delta, reach)
        pos = width
        while pos < reach and width < base_width:
            side.append(pos)
            width *= 2.0
            pos += width
        last = side[-1] if side else 0.0
        count = max(int(np.ceil((reach - last) / base_width)), 1)
        side.extend(last + (reach - last) * np.arange(1, count + 1) / count)
        pts = center + sign * np.asarray(side)
        pts[-1] = end   # no roundoff at the interval end
        edges.extend(pts)
    return np.unique(np.clip(edges, lo, hi))


def panel_rule(edges, n):
    """Nodes and weights of an n-point Gauss rule on every panel."""
    x, w = gauss_legendre(n)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * x
    weights = half[:, None] * w
    return nodes.ravel(), weights.ravel()


def graded_rule(center, dist, quad: QuadratureSpec, lo=-1.0, hi=1.0):
    """Rule on [lo, hi] refined toward ``center`` down to panels of width ~dist."""
    base = 1.0 / quad.base_panels
    delta = max(float(dist), 1e-13)
    if quad.refinement_levels is not None:
        delta = max(delta, base * 2.0**-quad.refinement_levels)
    edges = graded_edges(float(np.clip(center, lo, hi)), delta, lo, hi, base)
    return panel_rule(edges, quad.nodes_per_panel)


def coarse_pair_rules(center, dist, quad: QuadratureSpec, lo=-1.0, hi=1.0):
    """Fine and merged rules for the two innermost panels on each side.

    Comparing the two gives a cheap estimate of how much the last level of
    refinement changed the integral.
    """
    base = 1.0 / quad.base_panels
    delta = max(float(dist), 1e-13)
    if quad.refinement_levels is not None:
        delta = max(delta, base * 2.0**-quad.refinement_levels)
    center = float(np.clip(center, lo, hi))
    fine, coarse = [], []
    for sign, end in ((1.0, hi), (-1.0, lo)):
        reach = abs(end - center)
        if reach <= 0:
            continue
        e1 = min(delta, reach)
        e2 = min(3 * delta, reach)
        if e2 <= e1:
            continue
        fine.append(np.sort(center + sign * np.array([0.0, e1, e2])))
        coarse.append(np.sort(center + sign * np.array([0.0, e2])))
    n = quad.nodes_per_panel
    pick = lambda groups: [panel_rule(g, n) for g in groups]
    return pick(fine), pick(coarse)
