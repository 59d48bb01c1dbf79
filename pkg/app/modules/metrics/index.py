"""
Evaluation metrics: unbalanced Wasserstein divergence, cluster extraction
from grid weights, and correct-reconstruction matching.
"""
from dataclasses import dataclass, field
from typing import List, Tuple
import logging

import numpy as np
import ot
from scipy import ndimage, sparse
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist

from modules.geometry.index import GridSpec
from modules.measures.index import DiscreteMeasure
from shared.constants.defaults import MATCH_RADIUS, W_MIN

logger = logging.getLogger(__name__)

# Plan entries below this are treated as zero
PLAN_TOL = 1e-14


@dataclass
class UwResult:
    value: float
    transported: float
    removed: float
    created: float
    plan: List[Tuple[int, int, float]] = field(default_factory=list)


def unbalanced_wasserstein(nu1: DiscreteMeasure, nu2: DiscreteMeasure, R: float, p: float = 2) -> UwResult:
    """
    Unbalanced Wasserstein-p divergence with mass change price R^p / 2 per unit.

    The intermediate measure is eliminated: an optimal plan only moves
    mass between atoms, removes it at a source atom or creates it at a
    target atom. Adding one dummy node on each side turns this into a
    balanced transport problem,

        sources (m, sum n), targets (n, sum m),
        cost |x_i - y_j|^p between real atoms, R^p / 2 to or from a dummy,
        0 between the dummies,

    solved exactly by the network simplex. Since moving a unit over
    distance r costs r^p against R^p for removing and recreating it, no
    optimal plan transports farther than R.
    """
    if R <= 0:
        raise ValueError(f"transport radius R must be positive, got {R}")
    penalty = 0.5 * R ** p
    m, n = nu1.weights, nu2.weights
    if len(m) == 0 or len(n) == 0:
        removed, created = float(m.sum()), float(n.sum())
        return UwResult(value=penalty * (removed + created), transported=0.0, removed=removed, created=created)
    if nu1.dim != nu2.dim:
        raise ValueError(f"measure dimensions differ: {nu1.dim} vs {nu2.dim}")

    cost = cdist(nu1.points, nu2.points) ** p
    extended = np.zeros((len(m) + 1, len(n) + 1))
    extended[:-1, :-1] = cost
    extended[:-1, -1] = penalty
    extended[-1, :-1] = penalty
    a = np.append(m, n.sum())
    b = np.append(n, m.sum())
    # equalize the totals exactly; they agree up to rounding
    b[-1] += a.sum() - b.sum()
    gamma = ot.emd(a, b, extended)

    transport = gamma[:-1, :-1]
    transported = float(transport.sum())
    removed = float(gamma[:-1, -1].sum())
    created = float(gamma[-1, :-1].sum())
    value = float((transport * cost).sum() + penalty * (removed + created))
    rows, cols = np.nonzero(transport > PLAN_TOL)
    plan = [(int(i), int(j), float(transport[i, j])) for i, j in zip(rows, cols)]
    return UwResult(value=max(value, 0.0), transported=transported, removed=removed, created=created, plan=plan)


def grid_measure(weights: np.ndarray, grid: GridSpec) -> DiscreteMeasure:
    """A Dirac at every cell centre carrying a nonzero weight"""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (grid.num_cells,):
        raise ValueError(f"weight vector of shape {weights.shape} does not match {grid.num_cells} cells")
    keep = weights > 0
    return DiscreteMeasure(grid.cell_centers()[keep], weights[keep])


def cluster_extract(weights: np.ndarray, grid: GridSpec, w_min: float = W_MIN) -> DiscreteMeasure:
    """
    Threshold the weights, label 8-connected groups of cells and return one
    atom per group at its centre of mass with the group's total mass.
    """
    if grid.dim != 2:
        raise ValueError(f"cluster extraction expects a 2-D grid, got dimension {grid.dim}")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (grid.num_cells,):
        raise ValueError(f"weight vector of shape {weights.shape} does not match {grid.num_cells} cells")
    m = grid.resolution
    kept = np.where(weights >= w_min, weights, 0.0)
    labels, count = ndimage.label(kept.reshape(m, m) > 0, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return DiscreteMeasure.empty(2)
    labels = labels.ravel()
    centers = grid.cell_centers()
    masses = np.bincount(labels, weights=kept, minlength=count + 1)[1:]
    points = np.column_stack([
        np.bincount(labels, weights=kept * centers[:, axis], minlength=count + 1)[1:] / masses
        for axis in range(2)
    ])
    return DiscreteMeasure(points, masses)


def match_configs(recon: DiscreteMeasure, truth: DiscreteMeasure, radius: float = MATCH_RADIUS) -> bool:
    """True iff a perfect pairing exists with every pair closer than radius"""
    if len(recon) != len(truth):
        return False
    if len(truth) == 0:
        return True
    adjacency = sparse.csr_matrix(cdist(recon.points, truth.points) < radius)
    matching = maximum_bipartite_matching(adjacency, perm_type='column')
    return bool(np.all(matching >= 0))


def uw_mass_terms(nu1: DiscreteMeasure, nu2: DiscreteMeasure, R: float, p: float = 2):
    """
    Mass statistics (A, B, C_p) around the atoms x_i of nu1, using open R-balls:
    A = nu2 mass outside every ball, B = sum_i |m_i - nu2(B_R(x_i))|,
    C_p = sum_i integral over B_R(x_i) of |x - x_i|^p d nu2.
    """
    if len(nu1) == 0:
        return float(nu2.total_mass), 0.0, 0.0
    if len(nu2) == 0:
        return 0.0, float(nu1.total_mass), 0.0
    dist = cdist(nu1.points, nu2.points)
    inside = dist < R
    A = float(nu2.weights[~inside.any(axis=0)].sum())
    ball_mass = inside @ nu2.weights
    B = float(np.abs(nu1.weights - ball_mass).sum())
    C = float((np.where(inside, dist ** p, 0.0) @ nu2.weights).sum())
    return A, B, C


def uw_bound(A: float, B: float, C: float, R: float, p: float = 2, q: float = None, total_mass: float = None) -> float:
    """
    Upper bound on the order-q divergence from the mass terms of order p
    (q defaults to p; q < p needs the total mass of the second measure).
    """
    q = p if q is None else q
    base = 0.5 * R ** q * (A + B)
    if q == p:
        return base + C
    if q > p:
        return base + R ** (q - p) * C
    if total_mass is None:
        raise ValueError("the bound for q < p needs the total mass of the second measure")
    if C == 0:
        return base
    factor = p / (p - q) * ((p - q) / q) ** (q / p)
    return base + factor * C ** (q / p) * total_mass ** (1 - q / p)
