"""Synthetic zone lattices, canonical road-network patterns, and crash
datasets generated from known parameters for oracle and recovery testing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import truncnorm

from .centrality import RoadGraph, Pattern
from .dataset import (
    LAND_USE_LEVELS,
    LandUse,
    ZoneRecord,
    build_design,
)
from .errors import DomainError, ValidationError
from .model import ModelSpec, PSI_CLAMP
from .weights import ADJACENCY, ProximityMatrix, ZoneTopology, build_weights

# Target moments for the default covariate generator: mean, sd, min, max.
COVARIATE_TARGETS = {
    "area_km2": (3.26, 2.4, 0.75, 13.42),
    "ln_production": (9.89, 0.88, 7.13, 12.1),
    "ln_attraction": (9.84, 0.96, 6.82, 12.02),
    "arterial_length_km": (3.13, 2.05, 0.34, 7.51),
    "access_density": (2.08, 1.31, 0.47, 7.73),
    "signal_density": (1.74, 0.75, 0.54, 4.05),
    "road_density": (3.11, 2.13, 0.29, 12.63),
}

# Observed class shares used to assign patterns and land uses to zones.
PATTERN_SHARES = ((Pattern.GRID, 0.17), (Pattern.IRREGULAR_GRID, 0.53),
                  (Pattern.MIXED, 0.20), (Pattern.LOLLIPOPS, 0.10))
LAND_USE_SHARES = ((LandUse.INDUSTRIAL, 0.183), (LandUse.COMMERCIAL, 0.223),
                   (LandUse.EDUCATIONAL, 0.074), (LandUse.TECHNICAL, 0.084),
                   (LandUse.RESIDENTIAL, 0.208), (LandUse.GREENSPACE, 0.084),
                   (LandUse.AGRICULTURAL, 0.144))

# Default ground-truth coefficients for recovery experiments, keyed by
# design-column label.
DEFAULT_TRUTH_BETA = {
    "intercept": 2.361,
    "ln_production": 0.073,
    "ln_attraction": -0.086,
    "arterial_length_km": 0.177,
    "access_density": 0.107,
    "signal_density": 0.314,
    "road_density": -0.027,
    "pattern[IrregularGrid]": 0.443,
    "pattern[Mixed]": 0.537,
    "pattern[Lollipops]": 0.692,
    "land_use[Commercial]": 0.15,
    "land_use[Educational]": 0.024,
    "land_use[Technical]": -0.115,
    "land_use[Residential]": 0.198,
    "land_use[Greenspace]": -0.082,
    "land_use[Agricultural]": 0.019,
}

_ICAR_GIBBS_SWEEPS = 200


@dataclass
class SimulationTruth:
    """Hidden generating parameters plus the realized random-effect scales."""

    beta: dict
    sigma_theta2: float = 0.04
    tau_c: float = 1.0
    phi_mode: str = "icar"           # "icar" or "none"
    theta_target_sd: float = None    # rescale realized theta to this sd
    phi_target_sd: float = None      # rescale realized phi to this sd
    seed: int = None
    theta_sd_realized: float = None
    phi_sd_realized: float = None
    alpha_true: float = None

    def to_dict(self) -> dict:
        return {
            "beta": dict(self.beta),
            "sigma_theta2": self.sigma_theta2,
            "tau_c": self.tau_c,
            "phi_mode": self.phi_mode,
            "theta_target_sd": self.theta_target_sd,
            "phi_target_sd": self.phi_target_sd,
            "seed": self.seed,
            "theta_sd_realized": self.theta_sd_realized,
            "phi_sd_realized": self.phi_sd_realized,
            "alpha_true": self.alpha_true,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationTruth":
        if "beta" not in d:
            raise ValidationError("truth is missing the 'beta' field")
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    @classmethod
    def from_json(cls, path) -> "SimulationTruth":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(payload)


def default_truth(**overrides) -> SimulationTruth:
    """The standard recovery truth: reference coefficients with a spatially
    dominated random-effect mix."""
    kwargs = {"beta": dict(DEFAULT_TRUTH_BETA), "sigma_theta2": 0.04, "tau_c": 4.0,
              "phi_mode": "icar", "theta_target_sd": 0.1, "phi_target_sd": 0.4}
    kwargs.update(overrides)
    return SimulationTruth(**kwargs)


def generate_lattice(m: int, boundary_km: float = 1.0, lanes: int = 2) -> ZoneTopology:
    """M x M rook-adjacency zone lattice with uniform boundaries and lanes."""
    if m < 2:
        raise DomainError("lattice size must be at least 2")
    pairs = []
    for r in range(m):
        for c in range(m):
            i = r * m + c
            if c + 1 < m:
                pairs.append((i, i + 1, boundary_km, lanes))
            if r + 1 < m:
                pairs.append((i, i + m, boundary_km, lanes))
    return ZoneTopology(zone_count=m * m, neighbor_pairs=tuple(pairs))


def _lattice_edges(rows: int, cols: int, base: int = 0) -> list:
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = base + r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return edges


def _grid_graph(size: int) -> RoadGraph:
    """Near-square lattice with exactly `size` nodes; a short final row is
    attached like any other lattice row."""
    rows = max(2, round(np.sqrt(size)))
    cols = size // rows
    spare = size - rows * cols
    edges = _lattice_edges(rows, cols)
    # Spare nodes extend an extra partial row under the first `spare` columns.
    for k in range(spare):
        node = rows * cols + k
        edges.append((node, (rows - 1) * cols + k))
        if k > 0:
            edges.append((node, node - 1))
    return RoadGraph(node_count=size, edges=tuple(edges))


def _connected_after_removal(n, edges, removed) -> bool:
    adj = [[] for _ in range(n)]
    removed = set(removed)
    for idx, (u, v) in enumerate(edges):
        if idx in removed:
            continue
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def _irregular_grid_graph(size: int, irregularity: float, rng) -> RoadGraph:
    """Lattice with a fraction of the parallel collector links removed.

    Row 0 plays the arterial and keeps all its links; removal candidates
    are the horizontal (collector-parallel) links of the other rows.
    """
    rows = max(2, round(np.sqrt(size)))
    cols = size // rows
    spare = size - rows * cols
    edges = _lattice_edges(rows, cols)
    for k in range(spare):
        node = rows * cols + k
        edges.append((node, (rows - 1) * cols + k))
        if k > 0:
            edges.append((node, node - 1))
    horizontal = [idx for idx, (u, v) in enumerate(edges)
                  if v == u + 1 and u >= cols]
    n_remove = int(round(irregularity * len(horizontal)))
    if n_remove == 0:
        return RoadGraph(node_count=size, edges=tuple(edges))
    for _ in range(100):
        removed = rng.choice(len(horizontal), size=n_remove, replace=False)
        removed_idx = [horizontal[i] for i in removed]
        if _connected_after_removal(size, edges, removed_idx):
            kept = [e for idx, e in enumerate(edges) if idx not in set(removed_idx)]
            return RoadGraph(node_count=size, edges=tuple(kept))
    raise DomainError("could not remove collector links without disconnecting the graph")


def _lollipop_graph(size: int, rng) -> RoadGraph:
    """Short arterial trunk with dead-end local branches hanging off it."""
    trunk_len = max(3, size // 6)
    edges = [(i, i + 1) for i in range(trunk_len - 1)]
    next_node = trunk_len
    while next_node < size:
        anchor = int(rng.integers(0, trunk_len))
        branch_len = int(rng.integers(1, 3))
        prev = anchor
        for _ in range(branch_len):
            if next_node >= size:
                break
            edges.append((prev, next_node))
            prev = next_node
            next_node += 1
    return RoadGraph(node_count=size, edges=tuple(edges))


def _mixed_graph(size: int, rng) -> RoadGraph:
    """Lattice grafted to a tree: a compact grid core with lollipop-style
    branches spreading from one edge of the core.  The core fraction is
    tuned so the class sits between the irregular grids and the lollipops."""
    core = max(4, int(size * 0.65))
    rows = max(2, round(np.sqrt(core)))
    cols = max(2, core // rows)
    core = rows * cols
    if core > size - 1:
        cols = max(2, cols - 1)
        core = rows * cols
    edges = _lattice_edges(rows, cols)
    next_node = core
    seam = [r * cols + (cols - 1) for r in range(rows)]
    while next_node < size:
        anchor = int(seam[int(rng.integers(0, len(seam)))])
        branch_len = int(rng.integers(1, 3))
        prev = anchor
        for _ in range(branch_len):
            if next_node >= size:
                break
            edges.append((prev, next_node))
            prev = next_node
            next_node += 1
    return RoadGraph(node_count=size, edges=tuple(edges))


def generate_pattern_network(pattern, size: int = 25, irregularity: float = 0.35,
                             seed: int = 0) -> RoadGraph:
    """Generate an idealized road network of one morphology class.

    Grid: near-square lattice.  IrregularGrid: lattice with a fraction of
    collector-parallel links deleted (connectivity preserved by redrawing).
    Mixed: grid core grafted to tree branches.  Lollipops: trunk path with
    dead-end branches.  All generators return exactly `size` nodes.
    """
    if isinstance(pattern, str):
        pattern = Pattern(pattern)
    if size < 9:
        raise DomainError("pattern networks need at least 9 nodes")
    rng = np.random.default_rng(seed)
    if pattern == Pattern.GRID:
        return _grid_graph(size)
    if pattern == Pattern.IRREGULAR_GRID:
        return _irregular_grid_graph(size, irregularity, rng)
    if pattern == Pattern.MIXED:
        return _mixed_graph(size, rng)
    if pattern == Pattern.LOLLIPOPS:
        return _lollipop_graph(size, rng)
    raise ValidationError(f"no generator for pattern {pattern!r}")


def _calibrated_truncnorm(mean, sd, lo, hi):
    """Truncated normal whose truncated mean equals the target mean."""
    def shifted_mean(loc):
        a, b = (lo - loc) / sd, (hi - loc) / sd
        return truncnorm.mean(a, b, loc=loc, scale=sd) - mean

    loc = brentq(shifted_mean, mean - 4 * sd, mean + 4 * sd, xtol=1e-10)
    a, b = (lo - loc) / sd, (hi - loc) / sd
    return a, b, loc, sd


def draw_covariates(n: int, rng, targets: dict = None) -> dict:
    """Draw the continuous covariate columns to the target moments."""
    targets = dict(COVARIATE_TARGETS if targets is None else targets)
    out = {}
    for name, (mean, sd, lo, hi) in targets.items():
        a, b, loc, scale = _calibrated_truncnorm(mean, sd, lo, hi)
        out[name] = truncnorm.rvs(a, b, loc=loc, scale=scale, size=n, random_state=rng)
    return out


def sample_icar(W: ProximityMatrix, tau_c: float, rng,
                sweeps: int = _ICAR_GIBBS_SWEEPS) -> np.ndarray:
    """Approximate draw from the intrinsic CAR prior by Gibbs passes over
    the single-site conditionals, centered per component afterwards."""
    n = W.zone_count
    ei, ej, ew = W.neighbor_arrays()
    wplus = W.row_sums
    neigh = [[] for _ in range(n)]
    for a, b, w in zip(ei, ej, ew):
        neigh[a].append((b, w))
        neigh[b].append((a, w))
    phi = rng.standard_normal(n) * 0.5
    phi[wplus == 0] = 0.0
    for _ in range(sweeps):
        for i in range(n):
            if wplus[i] == 0:
                continue
            m = sum(w * phi[j] for j, w in neigh[i]) / wplus[i]
            phi[i] = m + rng.standard_normal() / np.sqrt(tau_c * wplus[i])
    labels = W.component_labels
    for c in range(W.component_count):
        members = np.flatnonzero((labels == c) & (wplus > 0))
        if members.size:
            phi[members] -= phi[members].mean()
    return phi


def _rescale(vec: np.ndarray, target_sd: float) -> np.ndarray:
    sd = vec.std(ddof=1) if vec.size > 1 else 0.0
    if target_sd is None or sd == 0:
        return vec
    return vec * (target_sd / sd)


def simulate_dataset(topology: ZoneTopology, truth: SimulationTruth = None,
                     covariate_targets: dict = None, seed: int = 0):
    """Simulate one zone dataset from known parameters.

    Returns (records, truth) where the returned truth carries the realized
    random-effect standard deviations and the implied spatial share.
    """
    truth = truth if truth is not None else default_truth()
    rng = np.random.default_rng(seed)
    n = topology.zone_count

    cov = draw_covariates(n, rng, covariate_targets)
    patterns = rng.choice([p.value for p, _ in PATTERN_SHARES], size=n,
                          p=[s for _, s in PATTERN_SHARES])
    land_uses = rng.choice([l.value for l, _ in LAND_USE_SHARES], size=n,
                           p=[s for _, s in LAND_USE_SHARES])

    if truth.phi_mode not in ("icar", "none"):
        raise ValidationError(f"unknown phi_mode {truth.phi_mode!r}")
    theta = rng.standard_normal(n) * np.sqrt(truth.sigma_theta2)
    theta = _rescale(theta, truth.theta_target_sd)
    if truth.phi_mode == "icar":
        W = build_weights(topology, ADJACENCY)
        phi = sample_icar(W, truth.tau_c, rng)
        phi = _rescale(phi, truth.phi_target_sd)
    else:
        phi = np.zeros(n)

    # Design assembled through the same code path the fit uses.
    base_records = [
        ZoneRecord(zone_id=i, area_km2=float(cov["area_km2"][i]),
                   ln_production=float(cov["ln_production"][i]),
                   ln_attraction=float(cov["ln_attraction"][i]),
                   arterial_length_km=float(cov["arterial_length_km"][i]),
                   access_density=float(cov["access_density"][i]),
                   signal_density=float(cov["signal_density"][i]),
                   road_density=float(cov["road_density"][i]),
                   pattern=Pattern(patterns[i]), land_use=LandUse(land_uses[i]),
                   crash_count=0)
        for i in range(n)
    ]
    design = build_design(base_records, ModelSpec())
    missing = [lbl for lbl in design.labels if lbl not in truth.beta]
    if missing:
        raise ValidationError(f"truth beta is missing coefficients {missing}")
    beta = np.array([truth.beta[lbl] for lbl in design.labels])

    psi = design.matrix @ beta + theta + phi
    if np.any(np.abs(psi) > PSI_CLAMP):
        raise ValidationError(
            f"truth rejected: |psi| reaches {np.abs(psi).max():.2f}, "
            f"exp would overflow the count scale")
    y = rng.poisson(np.exp(psi))

    records = [ZoneRecord(zone_id=r.zone_id, area_km2=r.area_km2,
                          ln_production=r.ln_production, ln_attraction=r.ln_attraction,
                          arterial_length_km=r.arterial_length_km,
                          access_density=r.access_density, signal_density=r.signal_density,
                          road_density=r.road_density, pattern=r.pattern,
                          land_use=r.land_use, crash_count=int(y[i]))
               for i, r in enumerate(base_records)]

    sd_t = float(theta.std(ddof=1)) if n > 1 else 0.0
    sd_p = float(phi.std(ddof=1)) if n > 1 else 0.0
    realized = SimulationTruth(
        beta=dict(truth.beta), sigma_theta2=truth.sigma_theta2, tau_c=truth.tau_c,
        phi_mode=truth.phi_mode, theta_target_sd=truth.theta_target_sd,
        phi_target_sd=truth.phi_target_sd, seed=seed,
        theta_sd_realized=sd_t, phi_sd_realized=sd_p,
        alpha_true=(sd_p / (sd_t + sd_p)) if sd_t + sd_p > 0 else None)
    return records, realized
