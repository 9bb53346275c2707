"""Missing-data imputation instances on citation-style complexes.

A synthetic co-authorship model stands in for real citation data: papers
are author sets drawn from small communities, each paper gets a
heavy-tailed citation count, and every simplex (a set of co-authors) is
valued by the total citations of the papers that contain it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..complex import SimplicialComplex, build_complex
from ..errors import ConfigError, EmptyMask
from .io import MdiInstance


@dataclass(frozen=True)
class ValueDistribution:
    """Rounded log-normal; ``floor`` keeps counts strictly positive."""

    mean: float = 3.0
    sigma: float = 1.0
    floor: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v = np.rint(rng.lognormal(self.mean, self.sigma, size=n))
        return np.maximum(v, self.floor).astype(float)


@dataclass
class CoauthorshipComplex:
    complex: SimplicialComplex
    papers: list[tuple[int, ...]]
    citations: np.ndarray
    params: dict = field(default_factory=dict)

    def values(self, k: int) -> np.ndarray:
        return simplex_values(self.complex, k, self.papers, self.citations)


def simplex_values(X: SimplicialComplex, k: int, papers, citations) -> np.ndarray:
    out = np.zeros(X.n(k))
    for paper, c in zip(papers, citations):
        if len(paper) < k + 1 or k > X.max_order:
            continue
        for s in combinations(paper, k + 1):
            out[X.index(s)] += c
    return out


def generate_coauthorship(
    n_authors: int = 300,
    n_papers: int = 200,
    community_size: int = 12,
    max_authors: int = 5,
    max_order: int = 2,
    cross_prob: float = 0.1,
    distribution: ValueDistribution = ValueDistribution(),
    seed: int = 0,
) -> CoauthorshipComplex:
    """Random co-authorship complex with every author on at least one paper.

    Papers with more than ``max_order + 1`` authors contribute all their
    ``max_order``-faces instead of the full simplex.
    """
    if n_authors < max_authors or n_papers < 1:
        raise ConfigError("need at least max_authors authors and one paper")
    if max_authors < 1 or max_order < 0:
        raise ConfigError("max_authors must be positive and max_order non-negative")
    rng = np.random.default_rng(seed)
    n_comm = max(1, n_authors // community_size)
    community = rng.integers(n_comm, size=n_authors)
    members = [np.flatnonzero(community == c) for c in range(n_comm)]
    papers = []
    # one solo-or-group paper per author first so no vertex is isolated
    order = rng.permutation(n_authors)
    for a in order[: min(n_authors, n_papers)]:
        papers.append(_draw_paper(rng, int(a), members, community, n_authors, max_authors, cross_prob))
    while len(papers) < n_papers:
        a = int(rng.integers(n_authors))
        papers.append(_draw_paper(rng, a, members, community, n_authors, max_authors, cross_prob))
    covered = set().union(*map(set, papers))
    papers += [(a,) for a in range(n_authors) if a not in covered]
    citations = distribution.sample(rng, len(papers))
    tops = []
    for p in papers:
        tops.extend(combinations(p, max_order + 1) if len(p) > max_order + 1 else [p])
    X = build_complex(sorted(set(tops)))
    params = dict(
        n_authors=n_authors, n_papers=n_papers, community_size=community_size,
        max_authors=max_authors, max_order=max_order, cross_prob=cross_prob, seed=seed,
        distribution=dict(mean=distribution.mean, sigma=distribution.sigma, floor=distribution.floor),
    )
    return CoauthorshipComplex(X, papers, citations, params)


def _draw_paper(rng, lead, members, community, n_authors, max_authors, cross_prob):
    size = int(rng.integers(1, max_authors + 1))
    team = {lead}
    pool = members[community[lead]]
    tries = 0
    while len(team) < size and tries < 50:
        tries += 1
        if rng.random() < cross_prob or len(pool) <= 1:
            team.add(int(rng.integers(n_authors)))
        else:
            team.add(int(rng.choice(pool)))
    return tuple(sorted(team))


def make_instance(k: int, values, known) -> MdiInstance:
    """Bundle values and mask; hidden entries take the median of the known ones."""
    values = np.asarray(values, dtype=float)
    known = np.asarray(known, dtype=bool)
    if values.shape != known.shape:
        raise ConfigError("values and mask differ in length")
    if not known.any():
        raise EmptyMask("at least one entry must be known")
    filled = values.copy()
    filled[~known] = np.median(values[known])
    return MdiInstance(k, values, known, filled)


def hide_mask(n: int, missing_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Known-entry mask with ``ceil(missing_fraction * n)`` entries hidden."""
    if not 0.0 < missing_fraction < 1.0:
        raise ConfigError(f"missing_fraction must be in (0, 1), got {missing_fraction}")
    n_miss = min(math.ceil(missing_fraction * n - 1e-9), n - 1)
    known = np.ones(n, dtype=bool)
    known[rng.choice(n, size=n_miss, replace=False)] = False
    return known


def generate_mdi_instance(
    complex: SimplicialComplex,
    k: int,
    values=None,
    value_distribution: ValueDistribution = ValueDistribution(),
    missing_fraction: float = 0.3,
    seed: int = 0,
) -> MdiInstance:
    """Hide a random subset of order-``k`` values.

    Without ``values`` the order-``k`` simplices get independent draws from
    ``value_distribution``.
    """
    rng = np.random.default_rng(seed)
    n = complex.n(k)
    if values is None:
        values = value_distribution.sample(rng, n)
    values = np.asarray(values, dtype=float)
    if values.shape != (n,):
        raise ConfigError(f"{values.shape[0]} values for {n} simplices of order {k}")
    return make_instance(k, values, hide_mask(n, missing_fraction, rng))


def mask_protocol(complex: SimplicialComplex, k: int, values, missing_fraction: float,
                  n_masks: int = 10, seed: int = 0) -> list[MdiInstance]:
    """Instances for ``n_masks`` seeds derived from ``seed``."""
    return [generate_mdi_instance(complex, k, values, missing_fraction=missing_fraction, seed=seed + i)
            for i in range(n_masks)]


def within_tolerance(pred, truth, rel: float = 0.05) -> np.ndarray:
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    return np.abs(pred - truth) <= rel * np.abs(truth)


def imputation_accuracy(pred, inst: MdiInstance, rel: float = 0.05, *, missing_only: bool = True) -> float:
    """Fraction of (hidden) entries predicted within ``rel`` of the truth."""
    sel = inst.missing_mask if missing_only else np.ones_like(inst.known_mask)
    return float(within_tolerance(np.asarray(pred)[sel], inst.values[sel], rel).mean())
