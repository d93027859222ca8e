"""Per-firm sieve regressions (Step 1).

Each firm's outcome series is regressed on its sieve design with intercept.
The slope block together with the residual standard deviation forms the
feature vector used later for classification; the intercept estimates the
firm's level term and is excluded from classification.
"""

from dataclasses import dataclass

import numpy as np

from .basis import design_matrix
from .errors import InputError, RankDeficientError

RCOND_MIN = 1e-10


@dataclass
class FirmEstimate:
    """OLS results for one firm at sieve length m.

    intercept_hat estimates the firm's level term, pi_hat the
    (m-1) + m*p slope coefficients, sigma_v_hat the residual standard
    deviation (sum of squared residuals over T-1).
    """

    intercept_hat: float
    pi_hat: np.ndarray
    sigma_v_hat: float

    @property
    def theta(self):
        """Classification features: slopes plus residual variance.

        The variance form separates noise-level groups far more sharply
        than the standard deviation would.
        """
        return np.append(self.pi_hat, self.sigma_v_hat ** 2)


def default_m(T):
    """Default sieve length floor(T^(1/5)), floored at 2.

    The floor keeps the time-varying intercept block nonempty; with m = 1
    the intercept curve would have no free coefficient.
    """
    if T < 2:
        raise InputError(f"need T >= 2, got {T}")
    return max(2, int(np.floor(T ** 0.2)))


def _solve_ls(Z, y):
    """Least squares via SVD with a rank check; returns (coef, residuals)."""
    coef, _, rank, sv = np.linalg.lstsq(Z, y, rcond=None)
    rcond = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    if rank < Z.shape[1] or rcond < RCOND_MIN:
        raise RankDeficientError(
            f"design matrix numerically rank deficient "
            f"(reciprocal condition number {rcond:.2e})",
            rcond=rcond,
        )
    return coef, y - Z @ coef


def fit_firm(panel, i, m):
    """OLS for firm i on the intercept-augmented sieve design."""
    if not 0 <= i < panel.N:
        raise InputError(f"firm index {i} outside 0..{panel.N - 1}")
    T = panel.T
    ncols = m * (panel.p + 1)
    if T < ncols + 2:
        raise InputError(
            f"T={T} too small for m={m} with p={panel.p}: need T >= {ncols + 2}"
        )
    Z = design_matrix(panel.x[i], m, with_intercept=True)
    coef, resid = _solve_ls(Z, panel.y[i])
    sigma_v2 = float(resid @ resid) / (T - 1)
    return FirmEstimate(
        intercept_hat=float(coef[0]),
        pi_hat=coef[1:].copy(),
        sigma_v_hat=float(np.sqrt(sigma_v2)),
    )


def fit_all(panel, m):
    """Fit every firm; rank failures are aggregated with their firm labels."""
    if panel.T < m * (panel.p + 1) + 2:
        raise InputError(
            f"T={panel.T} too small for m={m} with p={panel.p}"
        )
    fits = []
    failures = []
    for i in range(panel.N):
        try:
            fits.append(fit_firm(panel, i, m))
        except RankDeficientError as exc:
            failures.append(f"firm {panel.firm_ids[i]}: {exc}")
    if failures:
        raise RankDeficientError(
            "per-firm estimation failed for: " + "; ".join(failures)
        )
    return fits
