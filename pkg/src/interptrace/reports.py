"""Small report containers shared across modules."""

from dataclasses import dataclass, field, asdict

import numpy as np


@dataclass
class EquivalenceReport:
    """Outcome of a two-sided equivalence check ``f ≃ g`` on a grid.

    Attributes
    ----------
    ratio_min, ratio_max, ratio_median : float
        Extremes and median of the sampled ratio ``f/g``.
    passed : bool
        True when both extremes are finite and the refinement drift is
        below the configured threshold (and any check-specific criteria
        hold).
    refinement_delta : float
        Relative change of the band under grid refinement.
    status : str
        ``"pass"``, ``"fail"`` or ``"inconclusive"``.
    details : dict
        Check-specific diagnostics.
    """

    ratio_min: float
    ratio_max: float
    ratio_median: float
    passed: bool
    refinement_delta: float
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    @property
    def band_width(self):
        """Ratio ``ratio_max / ratio_min`` (infinite if the minimum is 0)."""
        if self.ratio_min <= 0:
            return np.inf
        return self.ratio_max / self.ratio_min

    @classmethod
    def from_ratios(cls, ratios, refinement_delta, threshold=0.01, extra_ok=True,
                    details=None):
        r = np.asarray(ratios, dtype=float).ravel()
        finite = bool(np.all(np.isfinite(r))) and r.size > 0
        rmin = float(np.min(r)) if r.size else np.nan
        rmax = float(np.max(r)) if r.size else np.nan
        rmed = float(np.median(r)) if r.size else np.nan
        ok = finite and np.isfinite(refinement_delta) and \
            refinement_delta < threshold and bool(extra_ok)
        return cls(rmin, rmax, rmed, ok, float(refinement_delta),
                   details=dict(details or {}))

    def to_dict(self):
        return asdict(self)


@dataclass
class MCEstimate:
    """Monte Carlo estimate with a 95% normal-approximation half width."""

    value: float
    half_width_95: float
    n_samples: int

    @property
    def ci95(self):
        return self.half_width_95

    def contains(self, x, factor=1.0, slack=0.0):
        """True when ``|value - x| <= factor * half_width_95 + slack``."""
        return abs(self.value - x) <= factor * self.half_width_95 + slack

    def to_dict(self):
        return {"value": self.value, "ci95": self.half_width_95,
                "n": self.n_samples}
