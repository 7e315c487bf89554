"""Equivalence of the boundary-optimized margin risk and an isotonic LP.

The empirical margin risk minimized over the boundary,

    R(beta) = sum_pos [alpha + (d - beta)]_+  +  sum_neg [alpha - (d - beta)]_+,

is piecewise linear and convex in beta, so its minimum sits on a breakpoint
(d + alpha for positives, d - alpha for negatives). The same value is the
optimum of the linear program that shifts each distance by a nonnegative
slack xi until every corrected negative exceeds every corrected positive by
2*alpha, minimizing the total shift:

    min sum xi   s.t.   (d_neg + xi_neg) - (d_pos - xi_pos) >= 2*alpha, xi >= 0.

Both sides are solved exactly here: the risk by breakpoint enumeration, the
LP by its threshold structure (slacks at an optimum are hinge distances to a
common cut t). A brute-force vertex enumeration for tiny instances serves as
an independent check in the tests.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

LP_SIZE_LIMIT = 12


@dataclass(frozen=True)
class RiskInstance:
    """Positive-pair and negative-pair distances with a margin alpha."""

    pos_dists: tuple
    neg_dists: tuple
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "pos_dists", tuple(float(d) for d in self.pos_dists))
        object.__setattr__(self, "neg_dists", tuple(float(d) for d in self.neg_dists))
        if len(self.pos_dists) + len(self.neg_dists) == 0:
            raise ValueError("instance needs at least one distance")
        if any(d < 0 for d in self.pos_dists + self.neg_dists):
            raise ValueError("distances must be nonnegative")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def size(self):
        return len(self.pos_dists) + len(self.neg_dists)


def margin_risk_at(inst, beta):
    """The empirical margin risk at a fixed boundary."""
    pos = sum(max(0.0, inst.alpha + d - beta) for d in inst.pos_dists)
    neg = sum(max(0.0, inst.alpha - d + beta) for d in inst.neg_dists)
    return pos + neg


def margin_risk_min_beta(inst):
    """Exact minimizer by breakpoint enumeration.

    Returns (beta_star, risk); on ties the smallest minimizing breakpoint.
    """
    breakpoints = sorted(
        {d + inst.alpha for d in inst.pos_dists}
        | {d - inst.alpha for d in inst.neg_dists})
    risk, beta = min((margin_risk_at(inst, b), b) for b in breakpoints)
    return beta, risk


def isotonic_lp_optimum(inst):
    """Exact LP optimum via its threshold structure.

    At an optimum there is a cut t with xi_pos = [d + alpha - t]_+ and
    xi_neg = [t - (d - alpha)]_+, and t lies on a breakpoint. Instances above
    LP_SIZE_LIMIT distances are rejected (this solver is for verification at
    small scale, not production isotonic regression).
    """
    if inst.size > LP_SIZE_LIMIT:
        raise ValueError(
            f"instance has {inst.size} distances; the exact LP solver "
            f"accepts at most {LP_SIZE_LIMIT}")
    if not inst.pos_dists or not inst.neg_dists:
        return 0.0  # no crossing constraints; xi = 0 is feasible
    cuts = sorted(
        {d + inst.alpha for d in inst.pos_dists}
        | {d - inst.alpha for d in inst.neg_dists})
    best = np.inf
    for t in cuts:
        total = 0.0
        for d in inst.pos_dists:
            total += max(0.0, d + inst.alpha - t)
        for d in inst.neg_dists:
            total += max(0.0, t - (d - inst.alpha))
        best = min(best, total)
    return float(best)


def feasible_slacks_from_boundary(inst, beta):
    """Hinge slacks at a fixed boundary; always an LP-feasible point.

    Used to check the weak direction: the LP optimum never exceeds the
    margin risk at any beta.
    """
    xi_pos = [max(0.0, d + inst.alpha - beta) for d in inst.pos_dists]
    xi_neg = [max(0.0, beta - (d - inst.alpha)) for d in inst.neg_dists]
    return xi_pos, xi_neg


def lp_vertex_bruteforce(inst, tol=1e-9):
    """Independent LP solve by vertex enumeration (tiny instances only).

    Enumerates all basic points of {A xi >= b, xi >= 0} by activating
    variable-count many constraints, keeps the feasible ones, and returns
    the best objective. Exponential; intended for cross-checking the
    structural solver on instances with at most 4 crossing constraints.
    """
    p, q = len(inst.pos_dists), len(inst.neg_dists)
    if p == 0 or q == 0:
        return 0.0
    if p * q > 4:
        raise ValueError("brute-force verifier accepts at most 4 constraints")
    k = p + q
    rows = []
    rhs = []
    for i, dp in enumerate(inst.pos_dists):
        for j, dn in enumerate(inst.neg_dists):
            row = np.zeros(k)
            row[i] = 1.0
            row[p + j] = 1.0
            rows.append(row)
            rhs.append(2.0 * inst.alpha - (dn - dp))
    for v in range(k):  # xi_v >= 0
        row = np.zeros(k)
        row[v] = 1.0
        rows.append(row)
        rhs.append(0.0)
    a = np.asarray(rows)
    b = np.asarray(rhs)
    best = np.inf
    for active in combinations(range(len(a)), k):
        sub = a[list(active)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(active)])
        if np.all(a @ x >= b - tol):
            best = min(best, float(np.sum(x)))
    return best


def check_equivalence(inst):
    """Report both optima and their gap."""
    _, risk = margin_risk_min_beta(inst)
    lp = isotonic_lp_optimum(inst)
    return {"margin_risk": risk, "lp_risk": lp, "abs_diff": abs(risk - lp)}


def random_instance(rng, max_pos=5, max_neg=5, alphas=(0.1, 0.2)):
    """Random instance on distances U[0, 2]; at least one distance total."""
    while True:
        n_pos = int(rng.integers(0, max_pos + 1))
        n_neg = int(rng.integers(0, max_neg + 1))
        if n_pos + n_neg > 0:
            break
    return RiskInstance(
        pos_dists=tuple(rng.uniform(0.0, 2.0, n_pos)),
        neg_dists=tuple(rng.uniform(0.0, 2.0, n_neg)),
        alpha=float(rng.choice(alphas)))
