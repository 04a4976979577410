"""Zone proximity matrices for the CAR spatial prior.

Three weighting modes over the same zone topology: 0/1 first-order
adjacency, shared boundary length in km, and total lane count of the
arterials connecting each adjacent pair.  Matrices are stored as sparse
coordinate triples with a dense export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

ADJACENCY = "adjacency"
BOUNDARY_LENGTH = "boundary_length"
LANE_COUNT = "lane_count"
MODES = (ADJACENCY, BOUNDARY_LENGTH, LANE_COUNT)


@dataclass(frozen=True)
class ZoneTopology:
    """Zone adjacency structure with per-pair boundary lengths and lane counts.

    neighbor_pairs holds (zone_i, zone_j, boundary_length_km, lanes) tuples;
    each unordered pair appears at most once and a listed pair is adjacent,
    so its boundary length must be positive.  Lane counts may be zero.
    """

    zone_count: int
    neighbor_pairs: tuple = ()

    def __post_init__(self):
        if self.zone_count < 1:
            raise ValidationError("zone_count must be a positive integer")
        seen = {}
        norm = []
        for pair in self.neighbor_pairs:
            if len(pair) != 4:
                raise ValidationError(
                    f"pair {pair!r} must be (i, j, boundary_km, lanes)")
            i, j, boundary, lanes = pair
            if i == j:
                raise ValidationError(f"zone {i} paired with itself")
            for z in (i, j):
                if not (0 <= z < self.zone_count):
                    raise ValidationError(
                        f"zone id {z} out of range [0, {self.zone_count}) in pair {pair!r}")
            if not boundary > 0:
                raise ValidationError(
                    f"pair ({i}, {j}) listed as adjacent but boundary length is {boundary}")
            if lanes < 0 or int(lanes) != lanes:
                raise ValidationError(f"pair ({i}, {j}) has invalid lane count {lanes}")
            key = (min(i, j), max(i, j))
            attrs = (float(boundary), int(lanes))
            if key in seen:
                if seen[key] != attrs:
                    raise ValidationError(
                        f"pair {key} listed twice with conflicting attributes "
                        f"{seen[key]} vs {attrs}")
                raise ValidationError(f"pair {key} listed twice")
            seen[key] = attrs
            norm.append((key[0], key[1], attrs[0], attrs[1]))
        object.__setattr__(self, "neighbor_pairs", tuple(norm))


@dataclass
class ProximityMatrix:
    """Symmetric nonnegative zone-by-zone weight matrix.

    Entries are kept as upper-triangle coordinate triples (i, j, w) with
    i < j and w > 0; the dense form and row sums are derived.
    """

    zone_count: int
    mode: str
    triples: tuple = ()
    row_sums: np.ndarray = field(init=False)
    component_labels: np.ndarray = field(init=False)
    component_count: int = field(init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown proximity mode {self.mode!r}; expected {MODES}")
        sums = np.zeros(self.zone_count)
        seen = set()
        norm = []
        for i, j, w in self.triples:
            if i == j:
                raise ValidationError(f"diagonal entry ({i}, {i}) not allowed")
            if w < 0:
                raise ValidationError(f"negative weight {w} on pair ({i}, {j})")
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                raise ValidationError(f"pair ({a}, {b}) appears twice")
            seen.add((a, b))
            if w > 0:
                norm.append((int(a), int(b), float(w)))
                sums[a] += w
                sums[b] += w
        self.triples = tuple(sorted(norm))
        self.row_sums = sums
        labels, count = connected_components(self)
        self.component_labels = labels
        self.component_count = count

    @property
    def islands(self) -> list:
        """Zones with zero total weight."""
        return [int(i) for i in np.flatnonzero(self.row_sums == 0)]

    @property
    def has_islands(self) -> bool:
        return bool((self.row_sums == 0).any())

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.zone_count, self.zone_count))
        for i, j, w in self.triples:
            m[i, j] = w
            m[j, i] = w
        return m

    def neighbor_arrays(self):
        """Edge arrays (i_idx, j_idx, w) over the upper triangle, for
        vectorized quadratic forms."""
        if not self.triples:
            return (np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))
        arr = np.array(self.triples)
        return arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2]


def build_weights(topology: ZoneTopology, mode: str = ADJACENCY) -> ProximityMatrix:
    """Build the proximity matrix for one weighting mode.

    adjacency: 1 on every listed pair.  boundary_length: the shared boundary
    in km.  lane_count: total lanes of the connecting arterials; pairs with
    zero lanes get weight zero and drop out of the neighborhood in that mode.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown proximity mode {mode!r}; expected {MODES}")
    triples = []
    for i, j, boundary, lanes in topology.neighbor_pairs:
        if mode == ADJACENCY:
            w = 1.0
        elif mode == BOUNDARY_LENGTH:
            w = boundary
        else:
            w = float(lanes)
        triples.append((i, j, w))
    return ProximityMatrix(zone_count=topology.zone_count, mode=mode, triples=tuple(triples))


def row_sums(matrix) -> np.ndarray:
    """Row sums w_{i+} of a ProximityMatrix or dense array."""
    if isinstance(matrix, ProximityMatrix):
        return matrix.row_sums.copy()
    m = np.asarray(matrix, dtype=float)
    return m.sum(axis=1)


def connected_components(matrix) -> tuple:
    """Component labels and count under w > 0 adjacency.

    Accepts a ProximityMatrix or dense array.  Islands form singleton
    components, so the count G is at least 1 for any nonempty matrix.
    """
    if isinstance(matrix, ProximityMatrix):
        n = matrix.zone_count
        pairs = [(i, j) for i, j, w in matrix.triples if w > 0]
    else:
        m = np.asarray(matrix, dtype=float)
        n = m.shape[0]
        ii, jj = np.nonzero(m > 0)
        pairs = [(int(a), int(b)) for a, b in zip(ii, jj) if a < b]
    adj = [[] for _ in range(n)]
    for i, j in pairs:
        adj[i].append(j)
        adj[j].append(i)
    labels = np.full(n, -1, dtype=int)
    count = 0
    for start in range(n):
        if labels[start] != -1:
            continue
        labels[start] = count
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if labels[v] == -1:
                    labels[v] = count
                    stack.append(v)
        count += 1
    return labels, count


def read_topology(path) -> ZoneTopology:
    """Parse the zone-topology text format: a ``zones N`` header line then
    one ``i j boundary_km lanes`` line per adjacent pair."""
    pairs = []
    zone_count = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if parts[0] == "zones":
                if len(parts) != 2:
                    raise ValidationError(f"{path}:{lineno}: malformed header {text!r}")
                try:
                    zone_count = int(parts[1])
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: bad zone count {parts[1]!r}") from None
                continue
            if len(parts) != 4:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'i j boundary_km lanes', got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                boundary = float(parts[2])
                lanes = int(parts[3])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: malformed pair {text!r}") from None
            pairs.append((i, j, boundary, lanes))
    if zone_count is None:
        raise ValidationError(f"{path}: missing 'zones N' header")
    try:
        return ZoneTopology(zone_count=zone_count, neighbor_pairs=tuple(pairs))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_topology(topology: ZoneTopology, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"zones {topology.zone_count}\n")
        for i, j, boundary, lanes in topology.neighbor_pairs:
            fh.write(f"{i} {j} {boundary!r} {lanes}\n")


def read_weight_matrix(path) -> ProximityMatrix:
    """Parse the weight-matrix text format: optional ``zones N`` and
    ``mode NAME`` headers, then upper-triangle ``i j w`` lines (symmetric
    completion implied)."""
    triples = []
    zone_count = None
    mode = ADJACENCY
    max_id = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if parts[0] == "zones" and len(parts) == 2:
                zone_count = int(parts[1])
                continue
            if parts[0] == "mode" and len(parts) == 2:
                mode = parts[1]
                continue
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 'i j w', got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: malformed entry {text!r}") from None
            triples.append((min(i, j), max(i, j), w))
            max_id = max(max_id, i, j)
    if zone_count is None:
        zone_count = max_id + 1
    if zone_count < 1:
        raise ValidationError(f"{path}: no zones found")
    try:
        return ProximityMatrix(zone_count=zone_count, mode=mode, triples=tuple(triples))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_weight_matrix(matrix: ProximityMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"zones {matrix.zone_count}\n")
        fh.write(f"mode {matrix.mode}\n")
        for i, j, w in matrix.triples:
            fh.write(f"{i} {j} {w!r}\n")
