"""Ward-linkage agglomerative clustering of firm feature vectors (Step 2).

Clusters are merged bottom-up; at each step the pair with the smallest
Ward cost

    d(A, B) = |A||B| / (|A| + |B|) * ||mean_A - mean_B||^2

is merged, ties broken by the lexicographically smallest pair of cluster
ids, where a cluster's id is its smallest member index. Costs are updated
with the Lance-Williams recurrence; a full merge history is kept so the
dendrogram can be cut at any K without re-clustering. Group labels are
assigned 1..K by ascending smallest member index, which makes runs
bit-reproducible.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class GroupAssignment:
    """A partition of N firms into K nonempty groups labelled 1..K."""

    K: int
    membership: np.ndarray
    sizes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.membership = np.asarray(self.membership, dtype=int)
        labels, counts = np.unique(self.membership, return_counts=True)
        if len(labels) != self.K or labels[0] != 1 or labels[-1] != self.K:
            raise InputError(
                f"membership labels {labels.tolist()} do not form 1..{self.K}"
            )
        if self.sizes is None:
            self.sizes = counts
        self.sizes = np.asarray(self.sizes, dtype=int)
        if not np.array_equal(self.sizes, counts):
            raise InputError("sizes inconsistent with membership")

    @property
    def N(self):
        return len(self.membership)

    def members(self, k):
        """Firm indices of group k (1-based label), ascending."""
        return np.flatnonzero(self.membership == k)


@dataclass
class MergeHistory:
    """Ordered Ward merges (id_a, id_b, cost) with id_a < id_b, length N-1.

    Ids are smallest member indices; the merged cluster keeps id_a.
    """

    n: int
    merges: list

    def cut(self, K):
        """Partition obtained after the first N-K merges."""
        if not 1 <= K <= self.n:
            raise InputError(f"K={K} outside 1..{self.n}")
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b, _ in self.merges[: self.n - K]:
            parent[find(b)] = find(a)
        roots = [find(i) for i in range(self.n)]
        order = sorted(set(roots))
        label_of = {r: k + 1 for k, r in enumerate(order)}
        membership = np.array([label_of[r] for r in roots])
        return GroupAssignment(K=K, membership=membership)


def ward_distance(size_a, centroid_a, size_b, centroid_b):
    """Ward merge cost between two clusters given sizes and centroids."""
    ca = np.asarray(centroid_a, dtype=float)
    cb = np.asarray(centroid_b, dtype=float)
    if ca.shape != cb.shape:
        raise InputError(f"centroid shapes differ: {ca.shape} vs {cb.shape}")
    if size_a < 1 or size_b < 1:
        raise InputError("cluster sizes must be >= 1")
    diff = ca - cb
    return size_a * size_b / (size_a + size_b) * float(diff @ diff)


def _agglomerate(thetas):
    """Run the full merge sequence down to one cluster.

    Cost matrix D is kept for active cluster slots only; slot index equals
    cluster id (smallest member), so scanning the upper triangle in
    row-major order realizes the lexicographic tie-break.
    """
    X = np.asarray(thetas, dtype=float)
    n = X.shape[0]
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)

    diff = X[:, None, :] - X[None, :, :]
    D = 0.5 * np.einsum("ijk,ijk->ij", diff, diff)
    D[np.tril_indices(n, k=0)] = np.inf  # only the upper triangle is live

    merges = []
    for _ in range(n - 1):
        flat = np.argmin(D)
        a, b = divmod(int(flat), n)
        cost = float(D[a, b])
        merges.append((a, b, cost))

        # Lance-Williams update of costs against every other active cluster
        na, nb = sizes[a], sizes[b]
        idx = np.flatnonzero(active)
        idx = idx[(idx != a) & (idx != b)]
        if idx.size:
            nc = sizes[idx]
            dac = np.where(idx < a, D[idx, a], D[a, idx])
            dbc = np.where(idx < b, D[idx, b], D[b, idx])
            dnew = ((na + nc) * dac + (nb + nc) * dbc - nc * cost) / (na + nb + nc)
            D[np.minimum(idx, a), np.maximum(idx, a)] = dnew

        sizes[a] = na + nb
        active[b] = False
        D[b, :] = np.inf
        D[:, b] = np.inf
    return merges


def hac_cluster(thetas, K):
    """Cluster firm feature vectors into K groups.

    Returns:
        (GroupAssignment, MergeHistory); the history covers the full merge
        sequence so any other K can be cut from it directly.
    """
    X = np.asarray(thetas, dtype=float)
    if X.ndim != 2:
        raise InputError(f"thetas must be (N, d), got shape {X.shape}")
    n = X.shape[0]
    if not 1 <= K <= n:
        raise InputError(f"K={K} outside 1..{n}")
    history = MergeHistory(n=n, merges=_agglomerate(X))
    return history.cut(K), history


def best_label_permutation(assignment, truth):
    """Label permutation minimizing mismatches, with the mismatch count.

    The returned tuple ``perm`` maps assignment label k to truth label
    perm[k-1] + 1. Matching is brute force over permutations (padding with
    unused labels when the group counts differ), exact for the K <= 6
    regime this pipeline runs in.
    """
    if assignment.N != truth.N:
        raise InputError(
            f"partition sizes differ: {assignment.N} vs {truth.N}"
        )
    if assignment.K > 6 or truth.K > 6:
        raise InputError("permutation matching supports K <= 6 only")
    k_pad = max(assignment.K, truth.K)
    a = assignment.membership - 1
    b = truth.membership - 1
    best_perm, best = None, assignment.N + 1
    for perm in itertools.permutations(range(k_pad)):
        mapped = np.array(perm)[a]
        wrong = int(np.sum(mapped != b))
        if wrong < best:
            best_perm, best = perm, wrong
            if best == 0:
                break
    return best_perm, best


def classification_error(assignment, truth):
    """Smallest fraction of mismatched firms over group label permutations."""
    _, wrong = best_label_permutation(assignment, truth)
    return wrong / assignment.N
