"""Poisson-lognormal likelihood with an intrinsic CAR spatial effect.

The linear predictor for zone i is psi_i = x_i . beta + theta_i + phi_i,
with lambda_i = exp(psi_i).  theta is an iid normal(0, sigma_theta^2)
heterogeneity effect; phi carries spatial correlation under an intrinsic
(improper) CAR prior: conditionally, phi_i is normal around the weighted
mean of its neighbors with variance 1 / (tau_c * w_i+).  Identification
uses a per-component sum-to-zero constraint on phi, with the intercept
absorbing the spatial mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import gammaln

from .dataset import CONTINUOUS_COVARIATES
from .errors import DomainError, ValidationError
from .weights import ADJACENCY, MODES, ProximityMatrix

# Linear predictor clamp: |psi| above this is clipped and counted as a
# divergence event rather than allowed to overflow exp().
PSI_CLAMP = 30.0

PHI_SUM_TOL = 1e-10


@dataclass(frozen=True)
class NormalPrior:
    mean: float = 0.0
    variance: float = 1000.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValidationError("prior variance must be > 0")


@dataclass(frozen=True)
class GammaPrior:
    """shape/rate parameterization; also used for the inverse-gamma prior,
    where rate is the scale of the reciprocal."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValidationError("gamma/inverse-gamma parameters must be > 0")


@dataclass
class ModelSpec:
    """Covariate selection, dummy-coding bases, priors, and sampler toggles.

    coef_priors maps design-column labels to NormalPrior overrides; columns
    without an entry use default_coef_prior.  include_theta / include_phi
    switch the heterogeneity and spatial terms off for reduced models, and
    fixed_tau_c / fixed_sigma_theta2 pin a hyperparameter instead of
    sampling it.
    """

    covariates: tuple = CONTINUOUS_COVARIATES
    include_pattern: bool = True
    include_land_use: bool = True
    standardize: bool = False
    offset_log_arterial_length: bool = False
    default_coef_prior: NormalPrior = field(default_factory=NormalPrior)
    coef_priors: dict = field(default_factory=dict)
    sigma_theta_prior: GammaPrior = field(default_factory=lambda: GammaPrior(0.001, 0.001))
    tau_c_prior: GammaPrior = field(default_factory=lambda: GammaPrior(0.1, 0.1))
    proximity_mode: str = ADJACENCY
    include_theta: bool = True
    include_phi: bool = True
    fixed_tau_c: float = None
    fixed_sigma_theta2: float = None

    def __post_init__(self):
        self.covariates = tuple(self.covariates)
        if self.proximity_mode not in MODES:
            raise ValidationError(f"unknown proximity mode {self.proximity_mode!r}")
        for label, prior in self.coef_priors.items():
            if not isinstance(prior, NormalPrior):
                raise ValidationError(f"coef prior for {label!r} must be a NormalPrior")
        if self.fixed_tau_c is not None and not self.fixed_tau_c > 0:
            raise ValidationError("fixed_tau_c must be > 0")
        if self.fixed_sigma_theta2 is not None and not self.fixed_sigma_theta2 > 0:
            raise ValidationError("fixed_sigma_theta2 must be > 0")

    def prior_for(self, label: str) -> NormalPrior:
        return self.coef_priors.get(label, self.default_coef_prior)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["covariates"] = list(self.covariates)
        d["coef_priors"] = {k: {"mean": v.mean, "variance": v.variance}
                            for k, v in self.coef_priors.items()}
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        if "default_coef_prior" in d and isinstance(d["default_coef_prior"], dict):
            d["default_coef_prior"] = NormalPrior(**d["default_coef_prior"])
        if "coef_priors" in d:
            d["coef_priors"] = {k: NormalPrior(**v) if isinstance(v, dict) else v
                                for k, v in d["coef_priors"].items()}
        for key in ("sigma_theta_prior", "tau_c_prior"):
            if key in d and isinstance(d[key], dict):
                d[key] = GammaPrior(**d[key])
        if "covariates" in d:
            d["covariates"] = tuple(d["covariates"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ModelSpec":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        try:
            return cls.from_dict(payload)
        except TypeError as exc:
            raise ValidationError(f"{path}: bad model spec field ({exc})") from None


@dataclass
class ModelState:
    """One chain's current parameter values."""

    beta: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    sigma_theta2: float
    tau_c: float

    def validate(self, component_labels: np.ndarray = None) -> None:
        n = len(self.theta)
        if len(self.phi) != n:
            raise ValidationError("theta and phi must have equal length")
        if not self.sigma_theta2 > 0:
            raise ValidationError("sigma_theta2 must be > 0")
        if not self.tau_c > 0:
            raise ValidationError("tau_c must be > 0")
        if component_labels is not None:
            for c in np.unique(component_labels):
                s = self.phi[component_labels == c].sum()
                if abs(s) > PHI_SUM_TOL * max(1, n):
                    raise ValidationError(f"phi does not sum to zero on component {c}: {s}")


def clamp_psi(psi):
    """Clip the linear predictor into [-PSI_CLAMP, PSI_CLAMP]; the second
    return value counts clipped entries."""
    arr = np.asarray(psi, dtype=float)
    clipped = np.clip(arr, -PSI_CLAMP, PSI_CLAMP)
    events = int(np.count_nonzero(np.abs(arr) > PSI_CLAMP))
    if arr.ndim == 0:
        return float(clipped), events
    return clipped, events


def linear_predictor(state: ModelState, design, i: int = None):
    """psi and lambda = exp(psi) for one zone or all zones.

    Returns (psi, lam, diverged) where diverged flags clamp events.
    """
    matrix = design.matrix if hasattr(design, "matrix") else np.asarray(design)
    if matrix.shape[1] != len(state.beta):
        raise ValidationError(
            f"design has {matrix.shape[1]} columns but beta has {len(state.beta)}")
    if matrix.shape[0] != len(state.theta):
        raise ValidationError(
            f"design has {matrix.shape[0]} rows but theta has {len(state.theta)}")
    offset = getattr(design, "offset", None)
    psi = matrix @ state.beta + state.theta + state.phi
    if offset is not None:
        psi = psi + offset
    if i is not None:
        psi = psi[i]
    psi, events = clamp_psi(psi)
    return psi, np.exp(psi), events > 0


def poisson_loglik(y, lam) -> float:
    """log p(y | lambda) for Poisson counts, factorial constant included."""
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DomainError("y must be nonnegative integers")
    return float(np.sum(y * np.log(lam) - lam - gammaln(y + 1.0)))


def car_conditional(phi: np.ndarray, W: ProximityMatrix, tau_c: float, i: int) -> tuple:
    """Conditional mean and variance of phi_i given its neighbors.

    mean = sum_j (w_ij / w_i+) phi_j, variance = 1 / (tau_c * w_i+).
    Island zones (w_i+ = 0) are pinned at zero: returns (0.0, 0.0).
    """
    if not tau_c > 0:
        raise DomainError("tau_c must be > 0")
    wplus = W.row_sums[i]
    if wplus == 0:
        return 0.0, 0.0
    acc = 0.0
    for a, b, w in W.triples:
        if a == i:
            acc += w * phi[b]
        elif b == i:
            acc += w * phi[a]
    return float(acc / wplus), float(1.0 / (tau_c * wplus))


def icar_pairwise_sum(phi: np.ndarray, W: ProximityMatrix) -> float:
    """sum over unordered neighbor pairs of w_ij (phi_i - phi_j)^2."""
    ii, jj, w = W.neighbor_arrays()
    if len(w) == 0:
        return 0.0
    d = phi[ii] - phi[jj]
    return float(np.sum(w * d * d))


def icar_log_density_kernel(phi: np.ndarray, W: ProximityMatrix, tau_c: float,
                            check_constraint: bool = True) -> float:
    """Unnormalized log density of the intrinsic CAR prior.

    (n - G)/2 * ln tau_c - tau_c/2 * sum_{i<j} w_ij (phi_i - phi_j)^2 with
    G the number of connected components.  phi must sum to zero on each
    component (the constraint that makes the improper prior usable).
    """
    if not tau_c > 0:
        raise DomainError("tau_c must be > 0")
    phi = np.asarray(phi, dtype=float)
    if len(phi) != W.zone_count:
        raise ValidationError("phi length does not match the weight matrix")
    if check_constraint:
        labels = W.component_labels
        for c in range(W.component_count):
            s = phi[labels == c].sum()
            if abs(s) > 1e-8 * max(1, len(phi)):
                raise DomainError(f"phi does not sum to zero on component {c}: sum={s}")
    n, g = W.zone_count, W.component_count
    return float(0.5 * (n - g) * np.log(tau_c) - 0.5 * tau_c * icar_pairwise_sum(phi, W))
