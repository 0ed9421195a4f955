"""Building correlation-clustering instances from plain graphs.

Pipeline: read an undirected edge list, take the largest connected
component, then give every node pair a signed weight from its Jaccard
similarity.  Pairs with positive sign get dissimilarity 0, pairs with
negative sign get dissimilarity 1, and the magnitude becomes the pair
weight, yielding a dense instance for the solver.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import ProblemInstance, pair_count

log = logging.getLogger(__name__)

# Signed score s = log((1 + J - GUARD) / (1 - J + GUARD)), clipped to
# |s| <= SCORE_CAP, then pushed away from zero by the sign offset so
# every pair ends up with a strict sign.  The constants are fixed for
# reproducibility; there is no canonical choice.
JACCARD_GUARD = 0.05
SCORE_CAP = 10.0
DEFAULT_SIGN_OFFSET = 0.01


@dataclass
class Graph:
    """Simple undirected graph: sorted neighbor lists, no self-loops."""
    n: int
    adj: list
    dropped_duplicates: int = 0
    dropped_self_loops: int = 0
    labels: list = None  # original node ids, parallel to 0..n-1

    @property
    def num_edges(self):
        return sum(len(a) for a in self.adj) // 2

    def edges(self):
        for u in range(self.n):
            for v in self.adj[u]:
                if u < v:
                    yield (u, v)


def load_edge_list(path):
    """Parse "u v" lines into a simple graph; '#'/'%' lines are comments.

    Node ids may be arbitrary integers; they are relabeled 0..n-1 in
    sorted id order (original ids kept in Graph.labels).  Duplicate
    edges and self-loops are dropped and counted.
    """
    raw_edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped[0] in "#%":
                continue
            parts = stripped.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {stripped!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer node id") from exc
            raw_edges.append((u, v))
    ids = sorted({u for e in raw_edges for u in e})
    index = {u: i for i, u in enumerate(ids)}
    n = len(ids)
    neighbor_sets = [set() for _ in range(n)]
    self_loops = 0
    duplicates = 0
    for u, v in raw_edges:
        a, b = index[u], index[v]
        if a == b:
            self_loops += 1
            continue
        if b in neighbor_sets[a]:
            duplicates += 1
            continue
        neighbor_sets[a].add(b)
        neighbor_sets[b].add(a)
    if self_loops or duplicates:
        log.info("%s: dropped %d self-loop and %d duplicate edge lines",
                 path, self_loops, duplicates)
    adj = [sorted(s) for s in neighbor_sets]
    return Graph(n=n, adj=adj, dropped_duplicates=duplicates,
                 dropped_self_loops=self_loops, labels=ids)


def largest_component(graph):
    """Induced subgraph on the largest connected component, relabeled
    0..n-1 preserving the original node order."""
    if graph.n == 0:
        raise ValueError("empty graph")
    seen = [False] * graph.n
    best = []
    for start in range(graph.n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in graph.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        if len(comp) > len(best):
            best = comp
    keep = sorted(best)
    index = {u: i for i, u in enumerate(keep)}
    adj = [[index[v] for v in graph.adj[u]] for u in keep]
    labels = [graph.labels[u] for u in keep] if graph.labels else keep
    return Graph(n=len(keep), adj=adj, labels=labels)


def _jaccard_matrix(graph):
    """Jaccard index over closed neighborhoods for all node pairs."""
    n = graph.n
    rows = []
    cols = []
    for u in range(n):
        for v in graph.adj[u]:
            rows.append(u)
            cols.append(v)
        rows.append(u)
        cols.append(u)  # closed: every node neighbors itself
    B = sp.csr_matrix((np.ones(len(rows), dtype=np.float64), (rows, cols)),
                      shape=(n, n))
    inter = np.asarray((B @ B.T).todense())
    sizes = np.asarray(B.sum(axis=1)).ravel()
    union = sizes[:, None] + sizes[None, :] - inter
    return inter / union


def cc_instance(graph, offset=DEFAULT_SIGN_OFFSET, epsilon=0.2):
    """Dense signed instance: d_ij = 0 / w_ij = s_ij for positive pairs,
    d_ij = 1 / w_ij = -s_ij for negative pairs."""
    n = graph.n
    if n < 3:
        raise ValueError(f"need at least 3 nodes, got {n}")
    if not offset > 0:
        raise ValueError(f"sign offset must be positive, got {offset}")
    J = _jaccard_matrix(graph)
    s = np.log((1.0 + J - JACCARD_GUARD) / (1.0 - J + JACCARD_GUARD))
    np.clip(s, -SCORE_CAP, SCORE_CAP, out=s)
    s = np.where(s >= 0, s + offset, s - offset)
    D = np.where(s < 0, 1.0, 0.0)
    Wt = np.abs(s)
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(Wt, 0.0)
    return ProblemInstance(n, D, Wt, epsilon=epsilon)


def save_instance(instance, path):
    """Header "metricinst 1 <n> <epsilon>", then one "i j d w" row per
    pair in lexicographic order, 1-indexed."""
    n = instance.n
    with open(path, "w") as fh:
        fh.write(f"metricinst 1 {n} {instance.epsilon:.17g}\n")
        idx = 0
        for i in range(n):
            for j in range(i + 1, n):
                fh.write(f"{i + 1} {j + 1} {instance.d_flat[idx]:.17g} "
                         f"{instance.w_flat[idx]:.17g}\n")
                idx += 1


def load_instance(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "metricinst" or header[1] != "1":
            raise ValueError(f"{path}: bad header {' '.join(header)!r}")
        n = int(header[2])
        epsilon = float(header[3])
        D = np.zeros((n, n))
        Wt = np.ones((n, n))
        expected = pair_count(n)
        count = 0
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'i j d w'")
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            d, w = float(parts[2]), float(parts[3])
            D[i, j] = D[j, i] = d
            Wt[i, j] = Wt[j, i] = w
            count += 1
        if count != expected:
            raise ValueError(f"{path}: expected {expected} pair rows, found {count}")
    return ProblemInstance(n, D, Wt, epsilon=epsilon)
