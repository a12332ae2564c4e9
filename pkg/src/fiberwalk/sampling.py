"""Deploying a trained policy on a fiber.

Three levels: raw exploration (count what the policy can reach),
Metropolis-corrected chains whose stationary law is uniform on the
fiber, and the exchangeable-sample protocol that turns many
independent chains into one exact conditional p-value each.

The Metropolis correction needs the probability that the policy
proposes a given integer coefficient vector.  The continuous Gaussian
density is integrated over the unit cell that rounds to each
coefficient, with everything beyond the clamp bounds folded into the
boundary cells; masked-away coordinates contribute the mass of their
zero cell.  All of it is kept in log space so very wide coefficient
vectors cannot underflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .agent import policy_distribution, policy_sample
from .errors import ContractViolation
from .fibermdp import DiscoveredSet
from .lattice import combine_moves
from .models import chi_square_many, chi_square_statistic, fit_expected_counts

STUCK_FACTOR = 10  # consecutive infeasible proposals per dimension before warning


@dataclass(frozen=True)
class FiberSample:
    """Recorded chain trace; ``statistics`` aligns with ``points``."""

    points: np.ndarray
    statistics: np.ndarray
    chain_id: int
    seed: int
    stuck: bool = False

    def __post_init__(self):
        if self.points is not None and self.statistics is not None:
            if len(self.points) != len(self.statistics):
                raise ContractViolation("one statistic per recorded point")


@dataclass(frozen=True)
class GofTestResult:
    """Exact conditional test outcome from one exchangeable sample."""

    observed_statistic: float
    p_value: float
    sample_size: int
    chain_id: int
    seed: int
    stuck: bool = False

    def __post_init__(self):
        n = self.sample_size
        k = round(self.p_value * (n + 1))
        if not (1 <= k <= n + 1) or abs(k / (n + 1) - self.p_value) > 1e-12:
            raise ContractViolation("p-value is not of the form k/(n+1)")


def _finish(points, expected, chain_id, seed, stuck):
    pts = np.array(points, dtype=np.int64) if points is not None else None
    stats = None
    if pts is not None and expected is not None:
        stats = chi_square_many(pts, expected)
    return FiberSample(
        points=pts, statistics=stats, chain_id=chain_id, seed=seed, stuck=stuck
    )


def explore(ac, basis, start, steps, rng, expected=None, keep_points=True, chain_id=0, seed=-1):
    """Run the raw policy, rejecting infeasible proposals in place.

    Every proposal leaves one recorded point (unchanged when the move
    was thrown away), so the trace has ``steps + 1`` rows counting the
    start.  Returns ``(FiberSample, DiscoveredSet)``; the set counts
    distinct visited points.
    """
    state = np.asarray(start, dtype=np.int64)
    if np.any(state < 0):
        raise ContractViolation("start point has negative entries")
    discovered = DiscoveredSet()
    discovered.add(state)
    trace = [state.copy()] if keep_points else None
    stuck = False
    consecutive = 0
    limit = STUCK_FACTOR * basis.dim
    for _ in range(steps):
        sample = policy_sample(ac, state, rng, with_grad=False)
        candidate = state + combine_moves(sample.coeffs, basis).delta
        if np.any(candidate < 0):
            consecutive += 1
            if consecutive >= limit:
                stuck = True
        else:
            consecutive = 0
            state = candidate
            discovered.add(state)
        if keep_points:
            trace.append(state.copy())
    return _finish(trace, expected, chain_id, seed, stuck), discovered


def _log_cell_masses(values, mu, sigma, cmin, cmax):
    """Log-probability that N(mu, sigma) rounds+clamps to each value."""
    values = np.asarray(values, dtype=float)
    hi = np.where(values >= cmax, np.inf, values + 0.5)
    lo = np.where(values <= cmin, -np.inf, values - 0.5)
    mass = ndtr((hi - mu) / sigma) - ndtr((lo - mu) / sigma)
    return np.log(np.clip(mass, 1e-300, 1.0))


def proposal_log_prob(ac, state, coeffs):
    """Log-mass of proposing ``coeffs`` from ``state`` under the policy."""
    mu, sigma = policy_distribution(ac, state)
    return float(
        np.sum(_log_cell_masses(coeffs, mu, sigma, ac.coeff_min, ac.coeff_max))
    )


def mh_uniform(ac, basis, start, steps, rng, expected=None, keep_points=True, chain_id=0, seed=-1):
    """Metropolis chain targeting the uniform law on the fiber.

    Proposals come from the policy; acceptance uses the ratio of the
    reverse to the forward proposal mass.  Infeasible candidates are
    rejected outright, so the chain never leaves the fiber.
    """
    state = np.asarray(start, dtype=np.int64)
    if np.any(state < 0):
        raise ContractViolation("start point has negative entries")
    discovered = DiscoveredSet()
    discovered.add(state)
    trace = [state.copy()] if keep_points else None
    stuck = False
    consecutive = 0
    limit = STUCK_FACTOR * basis.dim
    for _ in range(steps):
        sample = policy_sample(ac, state, rng, with_grad=False)
        coeffs = sample.coeffs
        candidate = state + combine_moves(coeffs, basis).delta
        if np.any(candidate < 0):
            consecutive += 1
            if consecutive >= limit:
                stuck = True
        else:
            consecutive = 0
            reverse = -coeffs
            if np.all((reverse >= ac.coeff_min) & (reverse <= ac.coeff_max)):
                log_fwd = float(
                    np.sum(
                        _log_cell_masses(
                            coeffs, sample.mu, sample.sigma, ac.coeff_min, ac.coeff_max
                        )
                    )
                )
                log_rev = proposal_log_prob(ac, candidate, reverse)
                if np.log(rng.uniform()) < log_rev - log_fwd:
                    state = candidate
                    discovered.add(state)
        if keep_points:
            trace.append(state.copy())
    return _finish(trace, expected, chain_id, seed, stuck), discovered


def rank_p_value(sampled_statistics, observed_statistic):
    """Exact conditional p-value: (1 + #{sampled >= observed}) / (n + 1)."""
    sampled = np.asarray(sampled_statistics, dtype=float)
    return (1 + int(np.sum(sampled >= observed_statistic))) / (len(sampled) + 1)


def besag_clifford_pvalues(
    ac,
    basis,
    spec,
    data,
    chains,
    chain_length,
    seed,
    chain_steps=None,
):
    """One exact test per independent chain started at the observed data.

    Each chain runs ``chain_steps`` Metropolis steps (default 100x the
    sample size) and contributes the points at evenly spaced indices
    as its exchangeable sample of size ``chain_length``; chain ``i``
    uses its own generator seeded ``seed + i``, so results do not
    depend on scheduling.
    """
    expected = fit_expected_counts(spec, data)
    observed = chi_square_statistic(data.counts, expected)
    steps = chain_steps if chain_steps is not None else 100 * chain_length
    stride = max(1, steps // chain_length)
    if stride * chain_length > steps:
        raise ContractViolation("chain too short for the requested sample size")
    picks = stride * np.arange(1, chain_length + 1)

    results = []
    for cid in range(chains):
        chain_seed = seed + cid
        rng = np.random.default_rng(chain_seed)
        sample, _ = mh_uniform(
            ac,
            basis,
            data.counts,
            steps,
            rng,
            expected=expected,
            chain_id=cid,
            seed=chain_seed,
        )
        stats = sample.statistics[picks]
        results.append(
            GofTestResult(
                observed_statistic=float(observed),
                p_value=rank_p_value(stats, observed),
                sample_size=chain_length,
                chain_id=cid,
                seed=chain_seed,
                stuck=sample.stuck,
            )
        )
    return results


# ------------------------------------------------------------------
# CSV outputs
# ------------------------------------------------------------------

def write_sample_csv(path, sample, labels):
    """One fiber point per row, followed by its statistic."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join("_".join(str(v) for v in lab) for lab in labels))
        fh.write(",statistic\n")
        stats = sample.statistics
        for i, point in enumerate(sample.points):
            fh.write(",".join(str(int(v)) for v in point))
            fh.write(f",{repr(float(stats[i])) if stats is not None else ''}\n")


def write_pvalues_csv(path, results):
    with open(path, "w", newline="") as fh:
        fh.write("chain_id,p_value\n")
        for r in results:
            fh.write(f"{r.chain_id},{repr(r.p_value)}\n")


def write_histogram_csv(path, values, bins=20, lo=0.0, hi=1.0):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=(lo, hi))
    with open(path, "w", newline="") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for i, c in enumerate(counts):
            fh.write(f"{repr(float(edges[i]))},{repr(float(edges[i + 1]))},{int(c)}\n")
