"""Poisson point process sampling, scene construction, and cooperation percolation.

The typical user always sits at the origin (index 0 of ``user_points``); the
point processes are sampled on a finite disc whose radius is chosen so the
truncated far-field interference is a negligible fraction of the mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, ResourceError
from .params import CooperationConfig, SystemParams

# Fraction of the mean interference allowed in the truncated far-field tail.
DEFAULT_TAIL_FRACTION = 1e-3
DEFAULT_POINT_CAP = 10_000_000

EXTERNAL_USER = -1  # association sentinel for users outside the modeled cell


def sample_ppp(
    density: float,
    window_radius: float,
    rng: np.random.Generator,
    max_expected: float = DEFAULT_POINT_CAP,
) -> np.ndarray:
    """Sample a homogeneous PPP on a disc centered at the origin.

    Returns an (n, 2) array. The count is Poisson(density * pi * R^2) and the
    locations are i.i.d. uniform on the disc.
    """
    if not density > 0.0 or not window_radius > 0.0:
        raise DomainError("density and window_radius must be strictly positive")
    expected = density * math.pi * window_radius**2
    if expected > max_expected:
        raise ResourceError(
            f"expected point count {expected:.3g} exceeds the cap {max_expected:.3g}"
        )
    n = rng.poisson(expected)
    radii = window_radius * np.sqrt(rng.random(n))
    angles = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((radii * np.cos(angles), radii * np.sin(angles)))


def simulation_window_radius(
    params: SystemParams, tail_fraction: float = DEFAULT_TAIL_FRACTION
) -> float:
    """Sampling disc radius for network realizations.

    Starts from max(10 cell radii, 5 mean nearest-BS spacings) and grows until
    the truncated interference tail 2 pi lambda_b R^(2-eta) / (eta - 2) is below
    ``tail_fraction`` of the mean interference at the typical cell edge.
    """
    r = params.cell_radius
    mean_spacing = 0.5 / math.sqrt(params.bs_density)
    base = max(10.0 * r, 5.0 * mean_spacing)
    # (r / R)^(eta-2) <= tail_fraction bounds the tail by tail_fraction * mu.
    needed = r * tail_fraction ** (-1.0 / (params.path_loss_exp - 2.0))
    return max(base, needed)


def nearest_assignment(points: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """Index of the nearest site for each point (ties go to the lowest index)."""
    tree = cKDTree(sites)
    _, idx = tree.query(points)
    return np.asarray(idx, dtype=int)


@dataclass
class NetworkRealization:
    """One sampled network scene around the typical user at the origin.

    ``user_points[0]`` is the typical user. ``association[i]`` is the index of
    the BS serving user i, or EXTERNAL_USER for users outside the modeled cell
    in ball mode. ``mode`` is "exact" or "ball_approx".
    """

    bs_points: np.ndarray
    user_points: np.ndarray
    tagged_bs_index: int
    association: np.ndarray
    tagged_distance: float
    window_radius: float
    mode: str = "exact"

    @property
    def tagged_cell_users(self) -> np.ndarray:
        """Indices of users served by the tagged BS (the typical user included)."""
        return np.flatnonzero(self.association == self.tagged_bs_index)

    @property
    def intra_eavesdroppers(self) -> np.ndarray:
        """Tagged-cell users other than the typical user."""
        members = self.tagged_cell_users
        return members[members != 0]

    @property
    def external_eavesdroppers(self) -> np.ndarray:
        """Users outside the tagged cell."""
        return np.flatnonzero(self.association != self.tagged_bs_index)

    def cell_members(self) -> dict[int, np.ndarray]:
        """User indices per BS, skipping empty cells."""
        order = np.argsort(self.association, kind="stable")
        cells: dict[int, np.ndarray] = {}
        for b, members in _group_sorted(self.association, order):
            if b != EXTERNAL_USER:
                cells[int(b)] = members
        return cells


def _group_sorted(values: np.ndarray, order: np.ndarray):
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    for chunk in np.split(order, boundaries):
        yield values[chunk[0]], chunk


def build_realization(
    params: SystemParams,
    mode: str,
    rng: np.random.Generator,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> NetworkRealization:
    """Sample one network scene.

    exact: both PPPs are sampled on the disc, the typical user is appended at
    the origin, and every user is associated with its nearest BS; per-cell user
    counts vary.

    ball_approx: the tagged BS distance is drawn from the nearest-BS law,
    exactly users_per_cell users sit in the tagged cell at that distance,
    external users form a PPP outside the equal-area ball around the tagged BS,
    and interfering BSs form a PPP beyond the tagged distance from the origin.
    """
    if mode == "exact":
        return _build_exact(params, rng, tail_fraction)
    if mode == "ball_approx":
        return _build_ball(params, rng, tail_fraction)
    raise DomainError(f"unknown realization mode {mode!r}")


def _build_exact(params, rng, tail_fraction) -> NetworkRealization:
    window = simulation_window_radius(params, tail_fraction)
    bs = sample_ppp(params.bs_density, window, rng)
    while len(bs) == 0:  # probability exp(-lambda pi R^2), effectively never
        bs = sample_ppp(params.bs_density, window, rng)
    users = sample_ppp(params.user_density, window, rng)
    users = np.vstack((np.zeros((1, 2)), users))
    association = nearest_assignment(users, bs)
    tagged = int(association[0])
    return NetworkRealization(
        bs_points=bs,
        user_points=users,
        tagged_bs_index=tagged,
        association=association,
        tagged_distance=float(np.hypot(*bs[tagged])),
        window_radius=window,
        mode="exact",
    )


def sample_nearest_bs_distance(bs_density: float, rng: np.random.Generator, size=None):
    """Draw from the nearest-BS distance law (Rayleigh-type, density 2 pi l y e^{-l pi y^2})."""
    return np.sqrt(rng.exponential(1.0, size=size) / (math.pi * bs_density))


def annulus_radii(
    density: float,
    inner: float,
    outer: float,
    rng: np.random.Generator,
    max_expected: float = DEFAULT_POINT_CAP,
) -> np.ndarray:
    """Radii of a PPP restricted to an annulus, sorted ascending."""
    expected = density * math.pi * (outer**2 - inner**2)
    if expected > max_expected:
        raise ResourceError(
            f"expected point count {expected:.3g} exceeds the cap {max_expected:.3g}"
        )
    n = rng.poisson(expected)
    radii = np.sqrt(inner**2 + (outer**2 - inner**2) * rng.random(n))
    radii.sort()
    return radii


def _build_ball(params, rng, tail_fraction) -> NetworkRealization:
    window = simulation_window_radius(params, tail_fraction)
    y = float(sample_nearest_bs_distance(params.bs_density, rng))
    k = params.users_per_cell
    tagged_pos = np.array([y, 0.0])

    # Co-cell users all at distance y from the tagged BS; the typical user at
    # the origin is one of them.
    angles = rng.uniform(0.0, 2.0 * math.pi, k - 1)
    cocell = tagged_pos + y * np.column_stack((np.cos(angles), np.sin(angles)))

    # Interfering BSs: beyond the tagged distance from the origin.
    bs_radii = annulus_radii(params.bs_density, y, max(window, y), rng)
    bs_angles = rng.uniform(0.0, 2.0 * math.pi, len(bs_radii))
    interferers = np.column_stack(
        (bs_radii * np.cos(bs_angles), bs_radii * np.sin(bs_angles))
    )
    bs = np.vstack((tagged_pos[None, :], interferers))

    # External users: beyond the equal-area ball around the tagged BS.
    ext_outer = max(window, params.cell_radius)
    ext_radii = annulus_radii(params.user_density, params.cell_radius, ext_outer, rng)
    ext_angles = rng.uniform(0.0, 2.0 * math.pi, len(ext_radii))
    external = tagged_pos + np.column_stack(
        (ext_radii * np.cos(ext_angles), ext_radii * np.sin(ext_angles))
    )

    users = np.vstack((np.zeros((1, 2)), cocell, external))
    association = np.full(len(users), EXTERNAL_USER, dtype=int)
    association[: k] = 0
    return NetworkRealization(
        bs_points=bs,
        user_points=users,
        tagged_bs_index=0,
        association=association,
        tagged_distance=y,
        window_radius=window,
        mode="ball_approx",
    )


def dump_realization_csv(realization: NetworkRealization, path: str) -> None:
    """Write the scene as rows (kind, x, y, assigned_bs)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "x", "y", "assigned_bs"])
        for x, y in realization.bs_points:
            writer.writerow(["bs", repr(float(x)), repr(float(y)), ""])
        for (x, y), b in zip(realization.user_points, realization.association):
            writer.writerow(["user", repr(float(x)), repr(float(y)), int(b)])


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def largest_component(self) -> int:
        return max(
            (self.size[i] for i in range(len(self.parent)) if self.find(i) == i),
            default=0,
        )


@dataclass(frozen=True)
class PercolationReport:
    """Connectivity summary of the malicious-user cooperation graph."""

    threshold_density: float
    supercritical: bool
    largest_cluster_fraction: float


def percolation_threshold(coop_radius: float) -> float:
    """User density above which the cooperation network percolates."""
    return 8.0 * math.log(2.0) / coop_radius**2


def percolation_report(
    params: SystemParams,
    coop: CooperationConfig,
    window_radius: float,
    rng: np.random.Generator,
    connect_distance: float | None = None,
) -> PercolationReport:
    """Sample users, link pairs within the connection distance, report clusters.

    ``connect_distance`` defaults to the cooperation radius itself.  (Reading
    the overlap of discs of radius coop_radius as the link rule would give
    twice that; the parameter leaves the choice to the caller.)
    """
    d = coop.coop_radius if connect_distance is None else float(connect_distance)
    if not d > 0.0:
        raise DomainError("connect_distance must be strictly positive")
    points = sample_ppp(params.user_density, window_radius, rng)
    threshold = percolation_threshold(coop.coop_radius)
    supercritical = params.user_density > threshold
    n = len(points)
    if n == 0:
        return PercolationReport(threshold, supercritical, 0.0)

    uf = UnionFind(n)
    pairs = cKDTree(points).query_pairs(d, output_type="ndarray")
    for a, b in pairs:
        uf.union(int(a), int(b))
    return PercolationReport(
        threshold_density=threshold,
        supercritical=supercritical,
        largest_cluster_fraction=uf.largest_component() / n,
    )
