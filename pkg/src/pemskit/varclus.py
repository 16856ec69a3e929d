"""Variable clustering by iterative principal-component splitting.

All variables start in one cluster.  Any cluster whose correlation
matrix has a second eigenvalue above the threshold is split: each
member goes to whichever of the cluster's first two principal
components it has the larger squared correlation with.  After every
split, reassignment passes move each variable to the cluster whose
first component explains it best, until a full pass moves nothing.
Splitting stops when no second eigenvalue exceeds the threshold.

Membership decisions use squared correlation throughout, so they are
invariant under sign flips and positive rescaling of any input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateDataError
from .ingest import Dataset, PREDICTORS, PROCESS_PREDICTORS

DEFAULT_THRESHOLD = 1.0
REASSIGN_PASS_CAP = 100


@dataclass(frozen=True)
class VarCluster:
    id: int
    members: tuple[str, ...]
    loadings: tuple[float, ...]        # first-PC loadings, member order
    eigenvalue1: float
    eigenvalue2: float | None          # None for a singleton cluster


@dataclass(frozen=True)
class VariableClusterRow:
    variable: str
    cluster_id: int
    r2_own: float
    r2_next: float
    ratio: float                       # (1 - r2_own) / (1 - r2_next)


@dataclass(frozen=True)
class VarClusterReport:
    clusters: tuple[VarCluster, ...]
    rows: tuple[VariableClusterRow, ...]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def memberships(self) -> list[frozenset[str]]:
        return [frozenset(c.members) for c in self.clusters]

    def row(self, variable: str) -> VariableClusterRow:
        for r in self.rows:
            if r.variable == variable:
                return r
        raise KeyError(variable)


def dependence_tag(variable: str) -> str:
    """'process' for internal turbine parameters, 'weather' for ambient ones."""
    return "process" if variable in PROCESS_PREDICTORS else "weather"


def second_eigenvalue(corr) -> float:
    """Second-largest eigenvalue of a symmetric correlation matrix."""
    matrix = np.asarray(getattr(corr, "matrix", corr), dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 2:
        raise ConfigError(f"need a square matrix of size >= 2, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=1e-8):
        raise ConfigError("matrix is not symmetric")
    eigvals = np.linalg.eigvalsh(matrix)
    return float(eigvals[-2])


def _standardized(ds: Dataset, names: Sequence[str]) -> np.ndarray:
    data = ds.matrix(names)
    centered = data - data.mean(axis=0)
    stds = centered.std(axis=0, ddof=1)
    for i, s in enumerate(stds):
        if s == 0.0 or not np.isfinite(s):
            raise DegenerateDataError(f"variable '{names[i]}' has zero variance")
    return centered / stds


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    if vec[np.argmax(np.abs(vec))] < 0:
        return -vec
    return vec


def _cluster_eigs(z: np.ndarray, members: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors (columns) of the members'
    correlation matrix; singleton clusters get the trivial answer."""
    if len(members) == 1:
        return np.array([1.0]), np.array([[1.0]])
    sub = z[:, members]
    corr = (sub.T @ sub) / (z.shape[0] - 1)
    corr = (corr + corr.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    return eigvals, eigvecs


def _pc_scores(z: np.ndarray, members: list[int], component: np.ndarray) -> np.ndarray:
    return z[:, members] @ _fix_sign(component)


def _squared_corr(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Pearson correlation of two centered vectors."""
    denom = float(np.dot(a, a)) * float(np.dot(b, b))
    if denom == 0.0:
        return 0.0
    num = float(np.dot(a, b))
    return min((num * num) / denom, 1.0)


def _reassign(z: np.ndarray, clusters: list[list[int]]) -> list[list[int]]:
    """Move each variable to the cluster whose first PC it best matches,
    recomputing PCs each pass, until a pass moves nothing."""
    p = z.shape[1]
    for _ in range(REASSIGN_PASS_CAP):
        scores = []
        for members in clusters:
            eigvals, eigvecs = _cluster_eigs(z, members)
            scores.append(_pc_scores(z, members, eigvecs[:, 0]))
        owner = {}
        for ci, members in enumerate(clusters):
            for j in members:
                owner[j] = ci
        moved = False
        for j in range(p):
            r2s = [_squared_corr(z[:, j], s) for s in scores]
            target = int(np.argmax(r2s))
            if target != owner[j]:
                clusters[owner[j]].remove(j)
                clusters[target].append(j)
                owner[j] = target
                moved = True
        clusters = [c for c in clusters if c]
        if not moved:
            return clusters
    raise DegenerateDataError(
        f"variable reassignment did not converge within {REASSIGN_PASS_CAP} passes")


def cluster_variables(ds: Dataset,
                      variables: Sequence[str] | None = None,
                      threshold: float = DEFAULT_THRESHOLD) -> VarClusterReport:
    """Cluster variables and report per-variable own/next R-squared.

    A cluster is split while its second eigenvalue strictly exceeds
    ``threshold`` (largest offender first).  ``r2_own`` is the squared
    correlation of a variable with its own cluster's first PC,
    ``r2_next`` the maximum over all other clusters, and ``ratio`` is
    (1 - r2_own) / (1 - r2_next).  Singleton clusters report
    r2_own = 1 and ratio = 0 exactly.
    """
    names = tuple(variables) if variables is not None else PREDICTORS
    if len(names) < 2:
        raise ConfigError("variable clustering needs at least 2 variables")
    if not threshold > 0.0:
        raise ConfigError(f"threshold must be positive, got {threshold}")
    z = _standardized(ds, names)

    clusters: list[list[int]] = [list(range(len(names)))]
    blocked: set[int] = set()          # clusters where a split made an empty side
    for _ in range(10 * len(names) + 10):
        best_ci, best_l2 = -1, threshold
        for ci, members in enumerate(clusters):
            if len(members) < 2 or ci in blocked:
                continue
            eigvals, _ = _cluster_eigs(z, members)
            if float(eigvals[1]) > best_l2:
                best_ci, best_l2 = ci, float(eigvals[1])
        if best_ci < 0:
            break
        members = clusters[best_ci]
        _, eigvecs = _cluster_eigs(z, members)
        pc1 = _pc_scores(z, members, eigvecs[:, 0])
        pc2 = _pc_scores(z, members, eigvecs[:, 1])
        side1, side2 = [], []
        for j in members:
            zj = z[:, j]
            (side1 if _squared_corr(zj, pc1) >= _squared_corr(zj, pc2) else side2).append(j)
        if not side1 or not side2:
            blocked.add(best_ci)
            continue
        clusters[best_ci] = side1
        clusters.append(side2)
        clusters = _reassign(z, clusters)
        blocked.clear()
    else:
        raise DegenerateDataError("cluster splitting did not settle (split/merge cycle)")

    # Order clusters by size (largest first), then by canonical position
    # of their first member, and number them from 1.
    clusters.sort(key=lambda c: (-len(c), min(c)))
    final_scores = []
    cluster_objs = []
    for ci, members in enumerate(clusters):
        eigvals, eigvecs = _cluster_eigs(z, members)
        loading = _fix_sign(eigvecs[:, 0])
        final_scores.append(z[:, members] @ loading)
        r2_by_member = {j: _squared_corr(z[:, j], final_scores[-1]) for j in members}
        ordered = sorted(members, key=lambda j: (-r2_by_member[j], j))
        cluster_objs.append(VarCluster(
            id=ci + 1,
            members=tuple(names[j] for j in ordered),
            loadings=tuple(float(loading[members.index(j)]) for j in ordered),
            eigenvalue1=float(eigvals[0]),
            eigenvalue2=float(eigvals[1]) if len(members) > 1 else None,
        ))

    rows = []
    for ci, cluster in enumerate(cluster_objs):
        members = clusters[ci]
        for name in cluster.members:
            j = names.index(name)
            if len(members) == 1:
                r2_own = 1.0
            else:
                r2_own = _squared_corr(z[:, j], final_scores[ci])
            others = [_squared_corr(z[:, j], s)
                      for oi, s in enumerate(final_scores) if oi != ci]
            r2_next = max(others) if others else 0.0
            if r2_own >= 1.0:
                ratio = 0.0
            elif r2_next >= 1.0:
                ratio = float("inf")
            else:
                ratio = (1.0 - r2_own) / (1.0 - r2_next)
            rows.append(VariableClusterRow(name, cluster.id, r2_own, r2_next, ratio))
    return VarClusterReport(tuple(cluster_objs), tuple(rows))
