"""Synthetic panel generators for the six Monte Carlo designs.

Three frontier designs, each with a unique-law (U) and a mixture-law (M)
variant for the level term:

* design 1: two groups that differ in their frontier curves, common noise
  level, one regressor drawn N(1, 1).
* design 2: a common frontier but two noise levels (0.5 and 1.5), one
  regressor drawn N(2, 0.75^2).
* design 3: three groups differing in frontiers and noise, two regressors
  drawn N(1, 0.5^2).

Intercept curves are centered to integrate to zero over [0, 1]; centering
constants are computed by quadrature at generation time. Two of the slope
curves diverge at an endpoint of [0, 1], so frontier formulas evaluate on
arguments clamped to [1e-3, 1 - 1e-3]; the clamp is recorded in the truth
metadata. Every random draw comes from a counter-derived stream keyed by
(seed, design, replication, firm, role), so any single cell can be
regenerated in isolation and results do not depend on scheduling.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InputError
from .panel import PanelData

DESIGNS = ("dgp1u", "dgp1m", "dgp2u", "dgp2m", "dgp3u", "dgp3m")

CLAMP_LO = 1e-3
CLAMP_HI = 1.0 - 1e-3

# stream roles per firm
_ROLE_X, _ROLE_V, _ROLE_U, _ROLE_COMPONENT = 0, 1, 2, 3


@dataclass(frozen=True)
class UniqueLaw:
    alpha0: float = 0.5
    sigma_u: float = 1.0

    @property
    def kind(self):
        return "unique"


@dataclass(frozen=True)
class MixtureLaw:
    tau: float = 0.5
    alpha0_1: float = 1.0
    sigma_u_1: float = 0.75
    alpha0_2: float = -1.0
    sigma_u_2: float = 1.25

    @property
    def kind(self):
        return "mixture"


@dataclass
class DgpTruth:
    """Everything needed to score an estimate of a generated panel."""

    design: str
    K: int
    membership: np.ndarray
    sigma_v: np.ndarray
    alpha_funcs: list
    beta_funcs: list
    law: object
    u: np.ndarray
    component: np.ndarray
    clamp: tuple = (CLAMP_LO, CLAMP_HI)


def logistic_cdf(s, mu, sigma):
    return 1.0 / (1.0 + np.exp(-(s - mu) / sigma))


def _clamped(f):
    def g(s):
        return f(np.clip(s, CLAMP_LO, CLAMP_HI))

    return g


def centering_constant(f):
    """Integral of f over [0, 1] by adaptive quadrature."""
    probe = np.linspace(0.013, 0.987, 41)
    with np.errstate(all="ignore"):
        vals = np.asarray([f(s) for s in probe], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InputError("integrand is not finite away from the endpoints")
    value, _ = quad(f, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=300)
    return float(value)


def _centered(raw):
    c = centering_constant(_clamped(raw))
    clamped = _clamped(raw)

    def g(s):
        return clamped(s) - c

    return g


def _design_curves(base):
    """Clamped, centered frontier closures and noise levels per group."""
    if base == 1:
        alphas = [
            _centered(lambda s: 3.0 * logistic_cdf(s, 0.5, 0.1)),
            _centered(
                lambda s: 3.0 * (2 * s - 6 * s ** 2 + 4 * s ** 3 + logistic_cdf(s, 0.7, 0.05))
            ),
        ]
        betas = [
            [_clamped(lambda s: 3.0 * (2 * s - 4 * s ** 2 + 2 * s ** 3 + logistic_cdf(s, 0.6, 0.1)))],
            [_clamped(lambda s: 3.0 * (s - 3 * s ** 2 + 2 * s ** 3 + logistic_cdf(s, 0.7, 0.04)))],
        ]
        return alphas, betas, np.array([1.0, 1.0]), (1.0, 1.0)
    if base == 2:
        alpha = _centered(lambda s: np.log(s) * np.sin(6 * s))
        beta = _clamped(lambda s: 7.0 * np.sin(5 * s) * np.exp(-5 * s))
        return [alpha, alpha], [[beta], [beta]], np.array([0.5, 1.5]), (2.0, 0.75)
    if base == 3:
        alphas = [
            _centered(lambda s: -1.0 / (1.0 + 3.0 * s)),
            _centered(lambda s: -np.cos(4 * s)),
            _centered(lambda s: 5 * s ** 2 - s + 1.0),
        ]
        betas = [
            [_clamped(lambda s: 2 * s ** 3), _clamped(lambda s: np.log(5 * s))],
            [_clamped(lambda s: np.sin(4 * s)), _clamped(lambda s: np.log(s / (1.0 - s)))],
            [
                _clamped(lambda s: np.exp(-s) + np.sin(5 * s)),
                _clamped(lambda s: -5.0 * np.sin(s) * np.cos(5 * s) + 1.0),
            ],
        ]
        return alphas, betas, np.array([0.75, 1.25, 1.25]), (1.0, 0.5)
    raise InputError(f"unknown design family {base}")


def _parse_design(design):
    d = design.lower()
    if d not in DESIGNS:
        raise InputError(f"unknown design {design!r}; expected one of {DESIGNS}")
    return int(d[3]), d[4]


def sample_half_normal(sigma, rng, size=None):
    """Draw |N(0, sigma^2)|."""
    if sigma < 0:
        raise InputError(f"sigma must be nonnegative, got {sigma}")
    return np.abs(rng.standard_normal(size)) * sigma


def _firm_rng(seed, design_code, rep, firm, role):
    seq = np.random.SeedSequence(seed, spawn_key=(design_code, rep, firm, role))
    return np.random.default_rng(seq)


def _equal_split(N, K):
    sizes = [N // K + (1 if k < N % K else 0) for k in range(K)]
    membership = np.concatenate([np.full(s, k + 1) for k, s in enumerate(sizes)])
    return membership.astype(int)


def generate(design, N, T, seed, rep=0):
    """Generate one panel plus its ground truth.

    Args:
        design: one of dgp1u/dgp1m/dgp2u/dgp2m/dgp3u/dgp3m (case
            insensitive).
        N, T: firm and period counts; T must be at least 10 and N at
            least the design's group count.
        seed: master seed; together with ``rep`` it keys all streams.
        rep: replication index for Monte Carlo use.

    Returns:
        (PanelData, DgpTruth)
    """
    base, law_code = _parse_design(design)
    if T < 2:
        raise InputError(f"need T >= 2, got {T}")
    alphas, betas, sigma_v, (x_mean, x_sd) = _design_curves(base)
    K = len(alphas)
    p = len(betas[0])
    if N < K:
        raise InputError(f"need N >= {K} for design {design}, got {N}")
    membership = _equal_split(N, K)
    law = UniqueLaw() if law_code == "u" else MixtureLaw()
    dcode = DESIGNS.index(design.lower())

    tau_grid = np.arange(1, T + 1) / T
    alpha_vals = [f(tau_grid) * np.ones(T) for f in alphas]
    beta_vals = [
        np.column_stack([f(tau_grid) * np.ones(T) for f in fs]) for fs in betas
    ]

    y = np.empty((N, T))
    x = np.empty((N, T, p))
    u = np.empty(N)
    component = np.ones(N, dtype=int)
    for i in range(N):
        g = membership[i] - 1
        xi = x_mean + x_sd * _firm_rng(seed, dcode, rep, i, _ROLE_X).standard_normal((T, p))
        vi = sigma_v[g] * _firm_rng(seed, dcode, rep, i, _ROLE_V).standard_normal(T)
        if law.kind == "unique":
            level = law.alpha0
            su = law.sigma_u
        else:
            draw = _firm_rng(seed, dcode, rep, i, _ROLE_COMPONENT).uniform()
            if draw < law.tau:
                component[i], level, su = 1, law.alpha0_1, law.sigma_u_1
            else:
                component[i], level, su = 2, law.alpha0_2, law.sigma_u_2
        u[i] = sample_half_normal(su, _firm_rng(seed, dcode, rep, i, _ROLE_U))
        x[i] = xi
        y[i] = level - u[i] + alpha_vals[g] + (xi * beta_vals[g]).sum(axis=1) + vi

    panel = PanelData(y=y, x=x)
    truth = DgpTruth(
        design=design.lower(), K=K, membership=membership, sigma_v=sigma_v,
        alpha_funcs=alphas, beta_funcs=betas, law=law, u=u, component=component,
    )
    return panel, truth
