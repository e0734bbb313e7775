"""Empirical detector performance: ROC curves, power curves, dominance,
convergence of the finite-eps mixed detector, and prior sculpting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .detectors import DetectionProblem, DetectorSpec, clairvoyant, finite_eps_mixed, lmp, mixed_star
from .errors import ContractError
from .priors import MixedPriorSchedule, Prior
from .sampling import draw_background, draw_targets, substream

DEFAULT_CONFIDENCE = 0.99


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC: false-alarm rates and detection probabilities, both
    nondecreasing, from ``(0, 0)`` to ``(1, 1)``."""

    far: np.ndarray
    pd: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_dict(self) -> dict:
        # The leading +inf threshold (the (0, 0) point) is implied, keeping the JSON strict.
        return {"far": self.far.tolist(), "pd": self.pd.tolist(),
                "thresholds": self.thresholds[1:].tolist(), "auc": self.auc}


def _scores(v, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ContractError(f"{name} scores are empty")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} scores must be finite")
    return arr


def empirical_roc(bkg_scores, tgt_scores) -> RocCurve:
    """ROC swept over every distinct pooled score.

    Equal scores form a single threshold, so the AUC counts ties as half a
    win.  The AUC is accumulated in integer counts and divided once, which
    makes it bit-identical to the pairwise rank-sum statistic.
    """
    b = np.sort(_scores(bkg_scores, "background"))
    t = np.sort(_scores(tgt_scores, "target"))
    nb, nt = b.size, t.size
    thresholds = np.unique(np.concatenate([b, t]))[::-1]
    # Counts of scores >= each threshold.
    cb = nb - np.searchsorted(b, thresholds, side="left")
    ct = nt - np.searchsorted(t, thresholds, side="left")
    cb = np.concatenate([[0], cb]).astype(np.int64)
    ct = np.concatenate([[0], ct]).astype(np.int64)
    numerator = int(np.sum(np.diff(cb) * (ct[1:] + ct[:-1])))
    auc = numerator / (2 * nb * nt)
    return RocCurve(cb / nb, ct / nt, np.concatenate([[np.inf], thresholds]), auc)


def pairwise_auc(bkg_scores, tgt_scores) -> float:
    """Brute-force ``P(target > background) + P(tie)/2`` over all pairs."""
    b = _scores(bkg_scores, "background")
    t = _scores(tgt_scores, "target")
    wins = ties = 0
    for tv in t:
        wins += int(np.count_nonzero(tv > b))
        ties += int(np.count_nonzero(tv == b))
    return (wins + 0.5 * ties) / (b.size * t.size)


def power_at_far(bkg_scores, tgt_scores, far: float) -> float:
    """Fraction of targets strictly above the background ``1 - far`` quantile.

    The threshold uses "higher" interpolation: the smallest background score
    whose upper tail fraction does not exceed ``far``.  ``far = 1`` puts the
    threshold at minus infinity.
    """
    if not (0.0 < far <= 1.0):
        raise ContractError(f"false-alarm rate must lie in (0, 1], got {far}")
    b = _scores(bkg_scores, "background")
    t = _scores(tgt_scores, "target")
    if far == 1.0:
        return 1.0
    threshold = np.quantile(b, 1.0 - far, method="higher")
    return float(np.count_nonzero(t > threshold)) / t.size


def binomial_halfwidth(p, n, confidence: float = DEFAULT_CONFIDENCE):
    """Normal-approximation half-width of a binomial proportion interval."""
    z = stats.norm.ppf(0.5 + 0.5 * confidence)
    return z * np.sqrt(np.asarray(p) * (1.0 - np.asarray(p)) / n)


@dataclass(frozen=True)
class PowerCurve:
    label: str
    far: float
    abundances: np.ndarray
    powers: np.ndarray
    n_bkg: int
    n_tgt: int

    def __post_init__(self):
        if np.any(np.diff(self.abundances) <= 0):
            raise ContractError("power curve abundances must be strictly increasing")

    def to_dict(self) -> dict:
        return {"label": self.label, "far": self.far, "abundances": self.abundances.tolist(),
                "powers": self.powers.tolist(), "n_bkg": self.n_bkg, "n_tgt": self.n_tgt}


def power_curve(spec, a_grid, far: float, n_bkg: int, n_tgt_per_a: int, seed: int) -> PowerCurve:
    """Detection probability at fixed false-alarm rate across abundances.

    Background pixels come from the ``"background"`` substream of ``seed``
    and the targets at ``a_grid[i]`` from substream ``("target", i)``, so two
    detectors run with the same seed see the same pixels.  ``spec`` needs a
    ``problem`` attribute and a ``score`` method.
    """
    problem = spec.problem
    grid = np.asarray(a_grid, dtype=float)
    bkg, _ = draw_background(problem, substream(seed, "background"), n_bkg)
    sb = np.asarray(spec.score(bkg))
    powers = []
    for i, a in enumerate(grid):
        X, _ = draw_targets(problem, substream(seed, "target", i), np.full(n_tgt_per_a, a))
        powers.append(power_at_far(sb, spec.score(X), far))
    label = getattr(spec, "label", type(spec).__name__)
    return PowerCurve(label, far, grid, np.array(powers), n_bkg, n_tgt_per_a)


A_DOMINATES = "A_dominates"
B_DOMINATES = "B_dominates"
INCOMPARABLE = "incomparable"
INDISTINGUISHABLE = "statistically_indistinguishable"


@dataclass(frozen=True)
class DominanceReport:
    detector_a: str
    detector_b: str
    verdict: str
    differences: np.ndarray
    halfwidths: np.ndarray

    def to_dict(self) -> dict:
        return {"detector_a": self.detector_a, "detector_b": self.detector_b, "verdict": self.verdict,
                "differences": self.differences.tolist(), "halfwidths": self.halfwidths.tolist()}


def dominance_check(curve_a: PowerCurve, curve_b: PowerCurve,
                    confidence: float = DEFAULT_CONFIDENCE) -> DominanceReport:
    """Empirical (not proven) dominance between two power curves.

    ``A`` dominates when it is never significantly worse and somewhere
    significantly better.  The half-width of each difference treats the two
    power estimates as independent, which is conservative when both curves
    were computed on the same pixels.
    """
    if curve_a.far != curve_b.far or not np.array_equal(curve_a.abundances, curve_b.abundances):
        raise ContractError("power curves must share the false-alarm rate and abundance grid")
    diff = curve_a.powers - curve_b.powers
    z = stats.norm.ppf(0.5 + 0.5 * confidence)
    hw = z * np.sqrt(curve_a.powers * (1 - curve_a.powers) / curve_a.n_tgt
                     + curve_b.powers * (1 - curve_b.powers) / curve_b.n_tgt)
    if np.all(np.abs(diff) <= hw):
        verdict = INDISTINGUISHABLE
    elif np.all(diff >= -hw) and np.any(diff > hw):
        verdict = A_DOMINATES
    elif np.all(diff <= hw) and np.any(diff < -hw):
        verdict = B_DOMINATES
    else:
        verdict = INCOMPARABLE
    return DominanceReport(curve_a.label, curve_b.label, verdict, diff, hw)


@dataclass(frozen=True)
class ConvergenceStudy:
    epsilons: np.ndarray
    sup_errors: np.ndarray
    order: float

    def to_dict(self) -> dict:
        return {"epsilons": self.epsilons.tolist(), "sup_errors": self.sup_errors.tolist(),
                "order": self.order}


def fitted_order(steps, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def convergence_study(problem: DetectionProblem, epsilons, base_prior: Prior, beta: float,
                      pixels) -> ConvergenceStudy:
    """Sup-norm gap between the finite-eps mixed detector and its limit, per eps."""
    eps = np.asarray(epsilons, dtype=float)
    if eps.size < 2 or np.any(np.diff(eps) >= 0):
        raise ContractError("epsilon list must hold at least two strictly decreasing values")
    X = np.asarray(pixels, dtype=float)
    limit = mixed_star(problem, beta, base_prior, X)
    errors = np.array([
        np.max(np.abs(finite_eps_mixed(problem, MixedPriorSchedule(beta, e, base_prior), X) - limit))
        for e in eps
    ])
    return ConvergenceStudy(eps, errors, fitted_order(eps, errors))


@dataclass(frozen=True)
class SculptResult:
    beta0: float
    betas: list[float]
    abundances: list[float]
    objective: float
    evaluations: int
    budget_exhausted: bool
    history: list[tuple[list[float], float]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"beta0": self.beta0, "betas": self.betas, "abundances": self.abundances,
                "objective": self.objective, "evaluations": self.evaluations,
                "budget_exhausted": self.budget_exhausted}


def _component_scores(problem, abundances, include_lmp, X):
    rows = [lmp(problem, X)] if include_lmp else []
    rows += [clairvoyant(problem, a, X) for a in abundances]
    return np.vstack(rows)


def sculpt_optimize(problem: DetectionProblem, candidate_abundances, include_lmp: bool, a_grid,
                    far: float, n_bkg: int, n_tgt_per_a: int, seed: int, budget: int = 200,
                    min_step: float = 1.0 / 64) -> SculptResult:
    """Choose sculpting weights that maximize worst-case power over ``a_grid``.

    Component scores (LMP and one clairvoyant per candidate abundance) are
    computed once; each candidate mix is a linear combination of them,
    re-thresholded.  The search starts from the best simplex vertex or the
    barycenter and moves weight between pairs of components with a halving
    step until no move helps at ``min_step``.  Running out of ``budget``
    returns the best point so far with ``budget_exhausted`` set.
    """
    abundances = [float(a) for a in candidate_abundances]
    if not abundances:
        raise ContractError("need at least one candidate abundance")
    if budget < 1:
        raise ContractError(f"budget must allow at least one evaluation, got {budget}")
    grid = np.asarray(a_grid, dtype=float)
    bkg, _ = draw_background(problem, substream(seed, "background"), n_bkg)
    S_bkg = _component_scores(problem, abundances, include_lmp, bkg)
    S_tgt = []
    for i, a in enumerate(grid):
        X, _ = draw_targets(problem, substream(seed, "target", i), np.full(n_tgt_per_a, a))
        S_tgt.append(_component_scores(problem, abundances, include_lmp, X))
    k = S_bkg.shape[0]

    evaluations = 0
    history = []

    def objective(w):
        nonlocal evaluations
        evaluations += 1
        sb = w @ S_bkg
        value = min(power_at_far(sb, w @ St, far) for St in S_tgt)
        history.append((w.tolist(), value))
        return value

    def result(w, value, exhausted):
        beta0 = float(w[0]) if include_lmp else 0.0
        betas = [float(b) for b in (w[1:] if include_lmp else w)]
        return SculptResult(beta0, betas, abundances, value, evaluations, exhausted, history)

    starts = list(np.eye(k))
    if k > 1:
        starts.append(np.full(k, 1.0 / k))
    best_w, best_val = None, -math.inf
    for w in starts:
        if evaluations >= budget:
            return result(best_w, best_val, True)
        val = objective(w)
        if val > best_val:
            best_w, best_val = w, val
    if k == 1:
        return result(best_w, best_val, False)

    step = 0.5
    while step >= min_step:
        improved = True
        while improved:
            improved = False
            for i in range(k):
                for j in range(k):
                    if i == j or best_w[j] <= 0:
                        continue
                    if evaluations >= budget:
                        return result(best_w, best_val, True)
                    delta = min(step, best_w[j])
                    w = best_w.copy()
                    w[i] += delta
                    w[j] -= delta
                    w = w / w.sum()
                    val = objective(w)
                    if val > best_val:
                        best_w, best_val, improved = w, val, True
        step /= 2.0
    return result(best_w, best_val, False)


def _pair_counts(a, b) -> tuple[int, int, int, int]:
    """Concordant, discordant, tied-only-in-a and tied-only-in-b pair counts."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size:
        raise ContractError(f"score vectors differ in length: {a.size} vs {b.size}")
    conc = disc = tie_a = tie_b = 0
    for i in range(a.size - 1):
        sa = np.sign(a[i + 1:] - a[i])
        sb = np.sign(b[i + 1:] - b[i])
        prod = sa * sb
        conc += int(np.count_nonzero(prod > 0))
        disc += int(np.count_nonzero(prod < 0))
        tie_a += int(np.count_nonzero((sa == 0) & (sb != 0)))
        tie_b += int(np.count_nonzero((sb == 0) & (sa != 0)))
    return conc, disc, tie_a, tie_b


def kendall_tau(a, b) -> float:
    """Kendall tau-b rank correlation from exact integer pair counts.

    Perfect agreement gives exactly 1.0, which a floating-point
    normalization does not always deliver.
    """
    conc, disc, tie_a, tie_b = _pair_counts(a, b)
    denom = (conc + disc + tie_a) * (conc + disc + tie_b)
    if denom == 0:
        return math.nan
    root = math.isqrt(denom)
    if root * root == denom:
        return (conc - disc) / root
    return (conc - disc) / math.sqrt(denom)


def discordant_pairs(a, b) -> int:
    """Number of pairs ordered strictly oppositely by ``a`` and ``b``."""
    return _pair_counts(a, b)[1]


def rank_agreement(scores: dict[str, np.ndarray]) -> list[dict]:
    """Pairwise Kendall tau and discordant-pair counts between named score vectors."""
    names = list(scores)
    out = []
    for i, p in enumerate(names):
        for q in names[i + 1:]:
            out.append({"a": p, "b": q, "kendall_tau": kendall_tau(scores[p], scores[q]),
                        "discordant_pairs": discordant_pairs(scores[p], scores[q])})
    return out
