"""Metropolis-within-Gibbs sampler for the Poisson-lognormal CAR model.

One sweep updates, in order: each regression coefficient by scalar random
walk, every heterogeneity effect theta_i (jointly vectorized: they are
conditionally independent), every spatial effect phi_i (vectorized over
graph-coloring classes so simultaneous sites are never neighbors), then
conjugate draws for sigma_theta^2 (inverse-gamma) and tau_c (gamma), and
finally a re-centering of phi with the intercept absorbing the removed
mean.  Proposal scales adapt toward 0.44 acceptance during burn-in only.

Determinism: every chain owns a PCG64 generator spawned from the config
seed, and random numbers are consumed in fixed-size blocks each sweep so
results are bit-identical across runs and thread counts.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from . import evaluate
from .errors import ConvergenceError, DomainError, McmcDivergenceError, ValidationError
from .model import (
    GammaPrior,
    ModelSpec,
    NormalPrior,
    PSI_CLAMP,
    icar_pairwise_sum,
)

_ADAPT_BATCH = 50
_PSI_REFRESH = 200

THREADS_ENV_VAR = "TAZCAR_THREADS"


@dataclass(frozen=True)
class McmcConfig:
    """Chain protocol: burn-in doubles as the adaptation window."""

    chains: int = 2
    burn_in: int = 20000
    iters: int = 50000
    thin: int = 1
    seed: int = 0
    target_accept: float = 0.44
    bgr_threshold: float = 1.1

    def __post_init__(self):
        if self.chains < 2:
            raise ValidationError("at least 2 chains are required for the BGR diagnostic")
        if self.burn_in <= 0 or self.iters <= 0 or self.thin <= 0:
            raise ValidationError("iteration counts must be positive")
        if not (0 < self.target_accept < 1):
            raise ValidationError("target_accept must be in (0, 1)")

    def to_dict(self) -> dict:
        return {"chains": self.chains, "burn_in": self.burn_in, "iters": self.iters,
                "thin": self.thin, "seed": self.seed,
                "target_accept": self.target_accept,
                "bgr_threshold": self.bgr_threshold}


def gelman_rubin(chains) -> float:
    """Univariate potential scale reduction factor over per-chain traces.

    W is the mean within-chain variance, B/n the variance of the chain
    means; Rhat = sqrt(((n-1)/n W + B/n) / W).  Two degenerate identical
    chains return 1 by convention.
    """
    traces = [np.asarray(c, dtype=float) for c in chains]
    if len(traces) < 2:
        raise ValidationError("need at least 2 chains")
    n = len(traces[0])
    if any(len(t) != n for t in traces):
        raise ValidationError("chains have unequal lengths")
    if n < 2:
        raise ValidationError("chains must have at least 2 draws")
    within = float(np.mean([t.var(ddof=1) for t in traces]))
    b_over_n = float(np.var([t.mean() for t in traces], ddof=1))
    if within == 0.0:
        return 1.0 if b_over_n == 0.0 else float("inf")
    return float(np.sqrt(((n - 1) / n * within + b_over_n) / within))


def sigma_theta_posterior(theta, prior: GammaPrior) -> tuple:
    """Conjugate inverse-gamma posterior (shape, rate) for sigma_theta^2."""
    theta = np.asarray(theta, dtype=float)
    return prior.shape + theta.size / 2.0, prior.rate + float(theta @ theta) / 2.0


def update_sigma_theta(theta, prior: GammaPrior, rng: np.random.Generator) -> float:
    """One inverse-gamma draw of sigma_theta^2 given the current theta."""
    shape, rate = sigma_theta_posterior(theta, prior)
    return rate / float(rng.standard_gamma(shape))


def tau_c_posterior(phi, W, component_count: int, prior: GammaPrior) -> tuple:
    """Conjugate gamma posterior (shape, rate) for tau_c.

    Degrees of freedom are n - G for G connected components; the rate grows
    by half the weighted pairwise squared-difference sum.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.size
    s = icar_pairwise_sum(phi, W)
    return prior.shape + (n - component_count) / 2.0, prior.rate + s / 2.0


def update_tau_c(phi, W, component_count: int, prior: GammaPrior,
                 rng: np.random.Generator) -> float:
    """One gamma draw of tau_c given the current phi."""
    shape, rate = tau_c_posterior(phi, W, component_count, prior)
    return float(rng.standard_gamma(shape)) / rate


def irls_poisson_fit(design, y, max_iter: int = 100, tol: float = 1e-8) -> tuple:
    """Maximum-likelihood Poisson regression by iteratively reweighted least
    squares; returns (beta, covariance).

    Converges when the score norm drops below tol; raises on rank-deficient
    designs or when max_iter is exhausted.
    """
    X = design.matrix if hasattr(design, "matrix") else np.asarray(design, dtype=float)
    offset = getattr(design, "offset", None)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if len(y) != n:
        raise ValidationError("y length does not match the design")
    if np.linalg.matrix_rank(X) < p:
        raise ValidationError("design matrix is rank deficient")
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    beta = np.zeros(p)
    ybar = max(y.mean(), 1e-8)
    beta[0] = math.log(ybar) - off.mean() if np.all(X[:, 0] == 1.0) else 0.0
    for _ in range(max_iter):
        eta = np.clip(X @ beta + off, -PSI_CLAMP, PSI_CLAMP)
        mu = np.exp(eta)
        score = X.T @ (y - mu)
        if float(np.linalg.norm(score)) < tol:
            info = X.T @ (X * mu[:, None])
            return beta, np.linalg.inv(info)
        info = X.T @ (X * mu[:, None])
        beta = beta + np.linalg.solve(info, score)
    raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations")


def informative_priors_from_irls(design, y, variance_scale: float = 1.0) -> dict:
    """Per-coefficient normal priors seeded from a maximum-likelihood fit,
    mirroring the practice of deriving informative priors from an initial
    frequentist estimate."""
    beta, cov = irls_poisson_fit(design, y)
    labels = design.labels if hasattr(design, "labels") else [f"b{j}" for j in range(len(beta))]
    return {label: NormalPrior(mean=float(b), variance=float(v) * variance_scale)
            for label, b, v in zip(labels, beta, np.diag(cov))}


@dataclass
class PosteriorReport:
    """Posterior summaries plus fit statistics and the run provenance."""

    parameters: dict           # label -> mean/sd/q025/q975/rhat/significant
    alpha: dict                # summary of the spatial share, or None values
    d_bar: float
    p_d: float
    dic: float
    r_squared: float
    deviance_trace: list
    acceptance: dict           # block -> mean acceptance rate
    rhat_threshold: float
    converged: bool
    clamp_events: int
    seed: int
    config: dict
    n_zones: int
    island_count: int = 0
    component_count: int = 1
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "alpha": self.alpha,
            "d_bar": self.d_bar,
            "p_d": self.p_d,
            "dic": self.dic,
            "r_squared": self.r_squared,
            "deviance_trace": self.deviance_trace,
            "acceptance": self.acceptance,
            "rhat_threshold": self.rhat_threshold,
            "converged": self.converged,
            "clamp_events": self.clamp_events,
            "seed": self.seed,
            "config": self.config,
            "n_zones": self.n_zones,
            "island_count": self.island_count,
            "component_count": self.component_count,
            "notes": self.notes,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorReport":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PosteriorReport":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        try:
            return cls.from_dict(payload)
        except TypeError as exc:
            raise ValidationError(f"{path}: bad report field ({exc})") from None

    def coefficient_labels(self) -> list:
        return [k for k in self.parameters
                if k not in ("tau_c", "sigma_theta2", "precision_theta")]

    def render_table(self) -> str:
        """Human-facing summary table: one row per parameter with mean,
        95% BCI, a significance marker when the interval excludes zero,
        and the convergence diagnostic."""
        lines = []
        lines.append(f"{'parameter':<28}{'mean':>10}  {'95% BCI':>22}   {'Rhat':>6}")
        coef = set(self.coefficient_labels())
        for label, row in self.parameters.items():
            bci = f"({row['q025']:.3f}, {row['q975']:.3f})"
            sig = " *" if (label in coef and row.get("significant")) else "  "
            rhat = f"{row['rhat']:.3f}" if row.get("rhat") is not None else "   -"
            lines.append(f"{label:<28}{row['mean']:>10.3f}  {bci:>22}{sig} {rhat:>6}")
        if self.alpha and self.alpha.get("mean") is not None:
            bci = f"({self.alpha['q025']:.3f}, {self.alpha['q975']:.3f})"
            lines.append(f"{'alpha (spatial share)':<28}{self.alpha['mean']:>10.3f}  {bci:>22}")
        lines.append("")
        lines.append(f"D_bar {self.d_bar:.2f}   p_D {self.p_d:.2f}   DIC {self.dic:.2f}"
                     f"   R2 {self.r_squared:.4f}")
        acc = "   ".join(f"{k} {v:.3f}" for k, v in self.acceptance.items())
        lines.append(f"acceptance: {acc}")
        lines.append(f"converged: {'yes' if self.converged else 'NO'}"
                     f" (Rhat threshold {self.rhat_threshold})")
        if self.clamp_events:
            lines.append(f"clamp events: {self.clamp_events}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def _greedy_coloring(n, ei, ej, active) -> list:
    """Partition active nodes into classes with no within-class neighbors."""
    neigh = [[] for _ in range(n)]
    for a, b in zip(ei, ej):
        neigh[a].append(b)
        neigh[b].append(a)
    color = np.full(n, -1, dtype=int)
    for u in range(n):
        if not active[u]:
            continue
        used = {color[v] for v in neigh[u] if color[v] >= 0}
        c = 0
        while c in used:
            c += 1
        color[u] = c
    classes = []
    for c in range(color.max() + 1 if color.size and color.max() >= 0 else 0):
        members = np.flatnonzero(color == c)
        if members.size:
            classes.append(members)
    return classes


def _prepare_spatial(W, n):
    """Precompute immutable spatial structure shared by all chains."""
    if W is None:
        return None
    if W.zone_count != n:
        raise ValidationError("weight matrix size does not match the dataset")
    ei, ej, ew = W.neighbor_arrays()
    wplus = W.row_sums
    active = wplus > 0
    csr = sp.csr_matrix(
        (np.concatenate([ew, ew]),
         (np.concatenate([ei, ej]), np.concatenate([ej, ei]))),
        shape=(n, n)) if len(ew) else sp.csr_matrix((n, n))
    labels = W.component_labels
    noniso = sorted({int(labels[i]) for i in range(n) if active[i]})
    comp_members = [np.flatnonzero((labels == c) & active) for c in noniso]
    return {
        "wplus": wplus,
        "ei": ei, "ej": ej, "ew": ew,
        "csr": csr,
        "active": active,
        "islands": int(np.count_nonzero(~active)),
        "component_count": W.component_count,
        "comp_members": comp_members,
        "classes": _greedy_coloring(n, ei, ej, active),
        # Intercept absorption of the removed phi mean is an exact identity
        # only with a single non-island component and no islands.
        "exact_recenter": len(comp_members) == 1 and not np.count_nonzero(~active),
    }


def _run_chain(chain_id, seed_seq, y, Xc, offset, spatial, spec, config,
               beta_init_center, beta_se, debug):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    n, p = Xc.shape
    y = y.astype(float)
    lgamma_const = float(np.sum(gammaln(y + 1.0)))

    has_theta = spec.include_theta
    has_phi = spec.include_phi and spatial is not None
    sample_sigma = has_theta and spec.fixed_sigma_theta2 is None
    sample_tau = has_phi and spec.fixed_tau_c is None

    prior_mean = np.array([spec.prior_for(lbl).mean for lbl in beta_se["labels"]])
    prior_var = np.array([spec.prior_for(lbl).variance for lbl in beta_se["labels"]])

    # Overdispersed start around the maximum-likelihood center.
    beta = beta_init_center + 2.0 * beta_se["se"] * rng.standard_normal(p)
    theta = 0.01 * rng.standard_normal(n) if has_theta else np.zeros(n)
    if has_phi:
        phi = 0.01 * rng.standard_normal(n)
        phi[~spatial["active"]] = 0.0
        for members in spatial["comp_members"]:
            phi[members] -= phi[members].mean()
    else:
        phi = np.zeros(n)
    sigma2 = spec.fixed_sigma_theta2 if spec.fixed_sigma_theta2 is not None else 0.1
    tau = spec.fixed_tau_c if spec.fixed_tau_c is not None else 1.0

    beta_scale = np.maximum(2.4 * beta_se["se"], 1e-3)
    theta_scale = np.full(n, 0.5)
    phi_scale = np.full(n, 0.5)

    if sample_sigma:
        sigma_shape = spec.sigma_theta_prior.shape + n / 2.0
    if sample_tau:
        tau_shape = (spec.tau_c_prior.shape
                     + (n - spatial["component_count"]) / 2.0)

    def fresh_psi():
        out = Xc @ beta + theta + phi
        if offset is not None:
            out = out + offset
        return out

    psi = fresh_psi()
    psic = np.clip(psi, -PSI_CLAMP, PSI_CLAMP)
    lam = np.exp(psic)

    total = config.burn_in + config.iters
    kept = len(range(config.burn_in, total, config.thin))
    draws_beta = np.empty((kept, p))
    draws_sigma2 = np.empty(kept)
    draws_tau = np.empty(kept)
    draws_dev = np.empty(kept)
    draws_alpha = np.full(kept, np.nan)
    sum_theta = np.zeros(n)
    sum_phi = np.zeros(n)
    sum_lam = np.zeros(n)

    acc_beta = np.zeros(p)
    acc_theta = np.zeros(n)
    acc_phi = np.zeros(n)
    win_beta = np.zeros(p)
    win_theta = np.zeros(n)
    win_phi = np.zeros(n)
    clamp_events = 0
    adaptation_frozen = False
    kept_idx = 0

    for t in range(total):
        in_burn = t < config.burn_in

        # --- regression coefficients: scalar random walks ---
        z = rng.standard_normal(p)
        logu = np.log(rng.random(p))
        for j in range(p):
            prop = beta[j] + beta_scale[j] * z[j]
            dpsi = Xc[:, j] * (prop - beta[j])
            psi_new = psi + dpsi
            psic_new = np.clip(psi_new, -PSI_CLAMP, PSI_CLAMP)
            lam_new = np.exp(psic_new)
            dlik = float(y @ (psic_new - psic) - lam_new.sum() + lam.sum())
            dprior = -((prop - prior_mean[j]) ** 2
                       - (beta[j] - prior_mean[j]) ** 2) / (2.0 * prior_var[j])
            if logu[j] < dlik + dprior:
                beta[j] = prop
                psi, psic, lam = psi_new, psic_new, lam_new
                acc_beta[j] += 1
                win_beta[j] += 1

        # --- heterogeneity effects: conditionally independent, one shot ---
        if has_theta:
            z = rng.standard_normal(n)
            logu = np.log(rng.random(n))
            prop = theta + theta_scale * z
            psi_new = psi + (prop - theta)
            psic_new = np.clip(psi_new, -PSI_CLAMP, PSI_CLAMP)
            lam_new = np.exp(psic_new)
            delta = (y * (psic_new - psic) - (lam_new - lam)
                     - (prop * prop - theta * theta) / (2.0 * sigma2))
            take = logu < delta
            theta[take] = prop[take]
            psi[take] = psi_new[take]
            psic[take] = psic_new[take]
            lam[take] = lam_new[take]
            acc_theta[take] += 1
            win_theta[take] += 1

        # --- spatial effects: vectorized over coloring classes ---
        if has_phi:
            z = rng.standard_normal(n)
            logu = np.log(rng.random(n))
            wplus = spatial["wplus"]
            for members in spatial["classes"]:
                s = spatial["csr"].dot(phi)
                m = s[members] / wplus[members]
                cur = phi[members]
                prop = cur + phi_scale[members] * z[members]
                psi_new = psi[members] + (prop - cur)
                psic_new = np.clip(psi_new, -PSI_CLAMP, PSI_CLAMP)
                lam_new = np.exp(psic_new)
                delta = (y[members] * (psic_new - psic[members])
                         - (lam_new - lam[members])
                         - 0.5 * tau * wplus[members]
                         * ((prop - m) ** 2 - (cur - m) ** 2))
                take = logu[members] < delta
                idx = members[take]
                phi[idx] = prop[take]
                psi[idx] = psi_new[take]
                psic[idx] = psic_new[take]
                lam[idx] = lam_new[take]
                acc_phi[idx] += 1
                win_phi[idx] += 1

        # --- conjugate hyperparameter draws ---
        if sample_sigma:
            rate = spec.sigma_theta_prior.rate + float(theta @ theta) / 2.0
            sigma2 = rate / float(rng.standard_gamma(sigma_shape))
        if sample_tau:
            d = phi[spatial["ei"]] - phi[spatial["ej"]]
            s_quad = float(np.sum(spatial["ew"] * d * d))
            rate = spec.tau_c_prior.rate + s_quad / 2.0
            tau = float(rng.standard_gamma(tau_shape)) / rate

        # --- re-center phi; the intercept absorbs the removed mean ---
        if has_phi:
            if debug and spatial["exact_recenter"]:
                ll_before = float(y @ psic - lam.sum())
            if spatial["exact_recenter"]:
                members = spatial["comp_members"][0]
                m = float(phi[members].mean())
                phi[members] -= m
                beta[0] += m
            else:
                for members in spatial["comp_members"]:
                    phi[members] -= phi[members].mean()
                # Projection without compensation: with several components
                # (or islands) a single intercept cannot absorb the means.
                psi = fresh_psi()
                psic = np.clip(psi, -PSI_CLAMP, PSI_CLAMP)
                lam = np.exp(psic)
            if debug and spatial["exact_recenter"]:
                p2 = fresh_psi()
                p2c = np.clip(p2, -PSI_CLAMP, PSI_CLAMP)
                ll_after = float(y @ p2c - np.exp(p2c).sum())
                if abs(ll_after - ll_before) > 1e-6 * max(1.0, abs(ll_before)):
                    raise AssertionError(
                        f"re-centering changed the likelihood: {ll_before} -> {ll_after}")

        clamp_events += int(np.count_nonzero(np.abs(psi) > PSI_CLAMP))

        if not (np.isfinite(psi).all() and np.isfinite(beta).all()
                and sigma2 > 0 and tau > 0):
            raise McmcDivergenceError(
                f"chain {chain_id} diverged at sweep {t}: "
                f"max|psi|={np.abs(psi).max():.3g}, sigma2={sigma2:.3g}, tau={tau:.3g}")

        # --- proposal adaptation, burn-in only ---
        if in_burn and (t + 1) % _ADAPT_BATCH == 0:
            batch = (t + 1) // _ADAPT_BATCH
            step = min(0.1, 1.0 / math.sqrt(batch))
            beta_scale *= np.exp(np.where(win_beta / _ADAPT_BATCH > config.target_accept,
                                          step, -step))
            if has_theta:
                theta_scale *= np.exp(np.where(win_theta / _ADAPT_BATCH > config.target_accept,
                                               step, -step))
            if has_phi:
                phi_scale *= np.exp(np.where(win_phi / _ADAPT_BATCH > config.target_accept,
                                             step, -step))
            win_beta[:] = 0
            win_theta[:] = 0
            win_phi[:] = 0
        if t == config.burn_in - 1:
            adaptation_frozen = True

        # Periodic refresh keeps incremental psi from drifting.
        if (t + 1) % _PSI_REFRESH == 0:
            psi = fresh_psi()
            psic = np.clip(psi, -PSI_CLAMP, PSI_CLAMP)
            lam = np.exp(psic)

        if not in_burn and (t - config.burn_in) % config.thin == 0:
            draws_beta[kept_idx] = beta
            draws_sigma2[kept_idx] = sigma2
            draws_tau[kept_idx] = tau
            draws_dev[kept_idx] = -2.0 * (float(y @ psic) - float(lam.sum()) - lgamma_const)
            sd_t = float(theta.std(ddof=1)) if n > 1 else 0.0
            sd_p = float(phi.std(ddof=1)) if n > 1 else 0.0
            if sd_t + sd_p > 0:
                draws_alpha[kept_idx] = sd_p / (sd_t + sd_p)
            sum_theta += theta
            sum_phi += phi
            sum_lam += lam
            kept_idx += 1

    denom = config.burn_in + config.iters
    return {
        "beta": draws_beta,
        "sigma2": draws_sigma2,
        "tau": draws_tau,
        "dev": draws_dev,
        "alpha": draws_alpha,
        "sum_theta": sum_theta,
        "sum_phi": sum_phi,
        "sum_lam": sum_lam,
        "kept": kept,
        "acc_beta": acc_beta / denom,
        "acc_theta": acc_theta / denom if has_theta else None,
        "acc_phi": acc_phi / denom if has_phi else None,
        "clamp_events": clamp_events,
        "adaptation_frozen": adaptation_frozen,
    }


def _summary_row(pooled, per_chain, significant_candidate=True):
    q025, q975 = np.quantile(pooled, [0.025, 0.975])
    if q025 > q975:
        raise AssertionError("credible interval bounds out of order")
    rhat = gelman_rubin(per_chain) if per_chain is not None else None
    row = {
        "mean": float(pooled.mean()),
        "sd": float(pooled.std(ddof=1)),
        "q025": float(q025),
        "q975": float(q975),
        "rhat": None if rhat is None else float(rhat),
    }
    if significant_candidate:
        row["significant"] = bool(q025 > 0.0 or q975 < 0.0)
    return row


def _resolve_threads(threads):
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get(THREADS_ENV_VAR, "1")))


def fit(y, design, W, spec: ModelSpec = None, config: McmcConfig = None,
        threads: int = None, debug: bool = False) -> PosteriorReport:
    """Fit the model by MCMC and assemble the posterior report.

    Chains run independently from spawned sub-seeds (optionally on a thread
    pool: the ``threads`` argument, or the TAZCAR_THREADS environment
    variable, defaulting to 1) and are merged in chain order, so the report
    is identical across thread counts.  A run whose R-hat exceeds the
    threshold comes back with converged=False rather than raising.
    """
    spec = spec if spec is not None else ModelSpec()
    config = config if config is not None else McmcConfig()
    y = np.asarray(y)
    if np.any(y < 0) or np.any(y != np.floor(np.asarray(y, dtype=float))):
        raise ValidationError("y must be nonnegative integer counts")
    X = design.matrix
    labels = list(design.labels)
    n, p = X.shape
    if len(y) != n:
        raise ValidationError("y length does not match the design")
    if spec.include_phi and W is None:
        raise ValidationError("a proximity matrix is required when include_phi is set")
    spatial = _prepare_spatial(W, n) if spec.include_phi else None
    if spec.include_phi and labels[0] != "intercept":
        raise ValidationError("the CAR term requires an intercept column")

    offset = design.offset
    # Internal mean-centering of the non-intercept columns decorrelates the
    # intercept from the slopes; slopes are unchanged and the intercept is
    # mapped back after sampling.
    center = X[:, 1:].mean(axis=0) if p > 1 else np.zeros(0)
    Xc = X.copy()
    if p > 1:
        Xc[:, 1:] -= center

    try:
        beta_hat, cov = irls_poisson_fit(
            type("D", (), {"matrix": Xc, "offset": offset, "labels": labels})(), y)
        se = np.sqrt(np.maximum(np.diag(cov), 1e-12))
    except (ConvergenceError, ValidationError, np.linalg.LinAlgError):
        beta_hat = np.zeros(p)
        beta_hat[0] = math.log(max(float(np.mean(y)), 1e-8))
        se = np.full(p, 0.1)
    beta_se = {"se": se, "labels": labels}

    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    nthreads = _resolve_threads(threads)
    args = [(c, seeds[c], np.asarray(y, dtype=float), Xc, offset, spatial, spec,
             config, beta_hat, beta_se, debug) for c in range(config.chains)]
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(lambda a: _run_chain(*a), args))
    else:
        results = [_run_chain(*a) for a in args]

    # Map design-scale draws back to raw covariate scale per chain.
    raw_beta = []
    for res in results:
        b = res["beta"].copy()
        if p > 1:
            b[:, 0] -= b[:, 1:] @ center
        if design.standardized:
            sds = design.col_sds
            means = design.col_means
            b[:, 0] -= b[:, 1:] @ (means[1:] / sds[1:])
            b[:, 1:] /= sds[1:]
        raw_beta.append(b)

    pooled_beta = np.vstack(raw_beta)
    parameters = {}
    for j, label in enumerate(labels):
        parameters[label] = _summary_row(pooled_beta[:, j],
                                         [b[:, j] for b in raw_beta])

    rhat_values = [parameters[label]["rhat"] for label in labels]
    if spec.include_phi and spec.fixed_tau_c is None:
        pooled_tau = np.concatenate([r["tau"] for r in results])
        parameters["tau_c"] = _summary_row(pooled_tau, [r["tau"] for r in results],
                                           significant_candidate=False)
        rhat_values.append(parameters["tau_c"]["rhat"])
    if spec.include_theta and spec.fixed_sigma_theta2 is None:
        pooled_s2 = np.concatenate([r["sigma2"] for r in results])
        parameters["sigma_theta2"] = _summary_row(pooled_s2, [r["sigma2"] for r in results],
                                                  significant_candidate=False)
        # The precision 1/sigma^2 is reported alongside the variance.
        parameters["precision_theta"] = _summary_row(
            1.0 / pooled_s2, [1.0 / r["sigma2"] for r in results],
            significant_candidate=False)
        rhat_values.append(parameters["sigma_theta2"]["rhat"])

    pooled_alpha = np.concatenate([r["alpha"] for r in results])
    valid_alpha = pooled_alpha[np.isfinite(pooled_alpha)]
    if valid_alpha.size:
        q025, q975 = np.quantile(valid_alpha, [0.025, 0.975])
        alpha_summary = {"mean": float(valid_alpha.mean()),
                         "sd": float(valid_alpha.std(ddof=1)) if valid_alpha.size > 1 else 0.0,
                         "q025": float(q025), "q975": float(q975)}
    else:
        alpha_summary = {"mean": None, "sd": None, "q025": None, "q975": None}

    kept_total = sum(r["kept"] for r in results)
    mean_theta = sum(r["sum_theta"] for r in results) / kept_total
    mean_phi = sum(r["sum_phi"] for r in results) / kept_total
    mean_lam = sum(r["sum_lam"] for r in results) / kept_total

    # Deviance at the posterior means of all latent quantities.
    mean_beta_design = np.vstack([r["beta"] for r in results]).mean(axis=0)
    psi_at_mean = Xc @ mean_beta_design + mean_theta + mean_phi
    if offset is not None:
        psi_at_mean = psi_at_mean + offset
    lam_at_mean = np.exp(np.clip(psi_at_mean, -PSI_CLAMP, PSI_CLAMP))
    pooled_dev = np.concatenate([r["dev"] for r in results])
    dic_res = evaluate.dic(pooled_dev, y, lam_at_mean)

    try:
        r2 = evaluate.r_squared(y, mean_lam)
    except DomainError:
        r2 = float("nan")

    acceptance = {"beta": float(np.mean([r["acc_beta"].mean() for r in results]))}
    if results[0]["acc_theta"] is not None:
        acceptance["theta"] = float(np.mean([r["acc_theta"].mean() for r in results]))
    if results[0]["acc_phi"] is not None:
        active = spatial["active"]
        acceptance["phi"] = float(np.mean([r["acc_phi"][active].mean() for r in results]))

    finite_rhats = [v for v in rhat_values if v is not None]
    converged = all(v <= config.bgr_threshold for v in finite_rhats)

    notes = []
    if dic_res.suspicious:
        notes.append("negative effective parameter count p_D; check the fit")
    if spatial is not None and spatial["islands"]:
        notes.append(f"{spatial['islands']} island zone(s): phi pinned at 0, "
                     "excluded from the sum-to-zero constraint")
    if not all(r["adaptation_frozen"] for r in results):
        raise AssertionError("proposal adaptation was not frozen after burn-in")

    return PosteriorReport(
        parameters=parameters,
        alpha=alpha_summary,
        d_bar=float(dic_res.d_bar),
        p_d=float(dic_res.p_d),
        dic=float(dic_res.dic),
        r_squared=float(r2),
        deviance_trace=[float(v) for v in pooled_dev],
        acceptance=acceptance,
        rhat_threshold=config.bgr_threshold,
        converged=bool(converged),
        clamp_events=int(sum(r["clamp_events"] for r in results)),
        seed=config.seed,
        config=config.to_dict(),
        n_zones=int(n),
        island_count=int(spatial["islands"]) if spatial else 0,
        component_count=int(spatial["component_count"]) if spatial else 1,
        notes=notes,
    )
