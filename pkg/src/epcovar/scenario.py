"""Discrete joint-loss scenarios and probability-weighted statistics.

Conventions used throughout the package:

- Positive numbers are losses. A value of 0.05 in ``unit="fraction"`` means a
  5% loss; the unit label is metadata only and never rescales anything.
- A panel stores J joint scenarios for the pair (X, Y) plus a strictly
  positive prior probability vector summing to one.
- Quantiles follow the left-continuous generalized inverse: the reported
  alpha-quantile is the smallest scenario value whose cumulative probability
  reaches alpha. This keeps Pr(value <= quantile) >= alpha exact on atomic
  distributions and is deterministic under ties.
- Scenario moments use the population convention (probabilities are exact
  weights, not sample frequencies).

All types are frozen and hold read-only arrays; they are safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PANEL_PROB_TOL = 1e-12
PROB_SUM_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


def as_weights(probs) -> np.ndarray:
    """Accept a ``Probabilities`` or any array-like and return a float array."""
    return np.asarray(getattr(probs, "weights", probs), dtype=float)


@dataclass(frozen=True)
class Probabilities:
    """Strictly positive probability vector over J scenarios."""

    weights: np.ndarray

    def __post_init__(self):
        w = _freeze(np.atleast_1d(self.weights))
        if w.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w <= 0.0):
            idx = int(np.argmax(w <= 0.0))
            raise ValueError(f"non-positive weight at index {idx}")
        total = float(w.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1 within {PROB_SUM_TOL}")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class ScenarioPanel:
    """J joint loss scenarios for assets X and Y with prior probabilities."""

    x: np.ndarray
    y: np.ndarray
    prior: np.ndarray
    unit: str = "fraction"

    def __post_init__(self):
        x = _freeze(np.atleast_1d(self.x))
        y = _freeze(np.atleast_1d(self.y))
        p = _freeze(np.atleast_1d(self.prior))
        if not (x.size == y.size == p.size):
            raise ValueError(
                f"length mismatch: x has {x.size}, y has {y.size}, prior has {p.size}"
            )
        if x.size < 2:
            raise ValueError("a panel needs at least two scenarios")
        for name, arr in (("x", x), ("y", y)):
            bad = ~np.isfinite(arr)
            if bad.any():
                raise ValueError(f"non-finite loss in {name} at index {int(np.argmax(bad))}")
        if np.any(p <= 0.0):
            raise ValueError(f"non-positive weight at index {int(np.argmax(p <= 0.0))}")
        total = float(p.sum())
        if abs(total - 1.0) > PANEL_PROB_TOL:
            raise ValueError(f"prior sums to {total!r}, expected 1 within {PANEL_PROB_TOL}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "prior", p)

    @property
    def size(self) -> int:
        return self.x.size

    def losses(self, asset: str) -> np.ndarray:
        """Loss vector for ``asset`` in {"x", "y"}."""
        if asset not in ("x", "y"):
            raise ValueError(f"unknown asset {asset!r}, expected 'x' or 'y'")
        return self.x if asset == "x" else self.y

    def prior_probabilities(self) -> Probabilities:
        return Probabilities(self.prior)


def build_panel(x, y, prior=None, unit: str = "fraction") -> ScenarioPanel:
    """Assemble a panel, normalizing ``prior`` or defaulting to uniform weights.

    ``prior`` entries must be strictly positive; they are rescaled to sum to
    one. Raises ValueError naming the offending index on bad input.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError(f"length mismatch: x has {x.size}, y has {y.size}")
    if prior is None:
        p = np.full(x.size, 1.0 / x.size)
    else:
        p = np.asarray(prior, dtype=float)
        if p.size != x.size:
            raise ValueError(f"length mismatch: prior has {p.size}, losses have {x.size}")
        if not np.all(np.isfinite(p)):
            raise ValueError(f"non-finite weight at index {int(np.argmax(~np.isfinite(p)))}")
        if np.any(p <= 0.0):
            raise ValueError(f"non-positive weight at index {int(np.argmax(p <= 0.0))}")
        p = p / p.sum()
    return ScenarioPanel(x=x, y=y, prior=p, unit=unit)


def _sorted_cumulative(values, probs):
    v = np.asarray(values, dtype=float)
    p = as_weights(probs)
    if v.size != p.size:
        raise ValueError(f"length mismatch: values has {v.size}, probs has {p.size}")
    order = np.argsort(v, kind="stable")
    return v[order], np.cumsum(p[order])


def weighted_quantile(values, probs, alpha: float) -> float:
    """Left-continuous alpha-quantile of a weighted atomic distribution.

    Returns the smallest value whose cumulative probability (in value order)
    reaches ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    v, cum = _sorted_cumulative(values, probs)
    idx = int(np.searchsorted(cum, alpha, side="left"))
    if idx >= v.size:  # alpha above total mass by float noise
        idx = v.size - 1
    return float(v[idx])


def interpolated_quantile(values, probs, alpha: float) -> float:
    """Mid-distribution interpolated alpha-quantile.

    Each atom is treated as the midpoint of its probability mass and the
    cumulative curve is linearly interpolated between atoms. On panels sampled
    or gridded from a continuous density this removes the O(grid spacing)
    snapping of the atomic estimator; on genuinely atomic data prefer
    ``weighted_quantile``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    v, cum = _sorted_cumulative(values, probs)
    uniq, start = np.unique(v, return_index=True)
    cum_at = np.append(cum[start[1:] - 1], cum[-1])  # mass up to and incl. each value
    mass = np.diff(np.concatenate(([0.0], cum_at)))
    mid = cum_at - mass / 2.0
    return float(np.interp(alpha, mid, uniq))


def moments(values, probs) -> tuple[float, float]:
    """Probability-weighted mean and population variance."""
    v = np.asarray(values, dtype=float)
    p = as_weights(probs)
    if v.size != p.size:
        raise ValueError(f"length mismatch: values has {v.size}, probs has {p.size}")
    mean = float(p @ v)
    var = float(p @ (v - mean) ** 2)
    return mean, var
