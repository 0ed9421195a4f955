"""Conflict-free orderings of the triplet set.

Work units are S_{i,k} sets (all triplets with smallest index i and
largest index k) or b x b tiles of such sets.  Units in the same round
lie on a common (block) anti-diagonal of the (i, k) grid, which
guarantees that any two triplets drawn from different units of the
round share at most one index, so their projection steps touch
disjoint variables.

Everything here is 0-based; the CLI converts to 1-based for display.
"""

import itertools
from dataclasses import dataclass


@dataclass(frozen=True)
class TripletSet:
    """S_{i,k}: all triplets (i, j, k) with i < j < k, for fixed i and k."""
    i: int
    k: int

    def __post_init__(self):
        if self.k < self.i + 2:
            raise ValueError(f"S_({self.i},{self.k}) is empty; need k >= i + 2")

    @property
    def size(self):
        return self.k - self.i - 1

    def triplets(self):
        for j in range(self.i + 1, self.k):
            yield (self.i, j, self.k)


@dataclass(frozen=True)
class Tile:
    """b x b block of S_{i,k} sets: i in [x, x+b-1], k in [z-b+1, z].

    Boundary tiles are implicitly clipped to the valid index range
    (0 <= i, k <= n-1, k >= i+2); the base x may be negative for the
    leading clipped tile of a block diagonal.
    """
    x: int
    z: int
    b: int

    def __post_init__(self):
        if self.b < 1:
            raise ValueError(f"tile size must be >= 1, got {self.b}")
        if self.z < max(self.x, 0) + 2:
            raise ValueError(f"tile ({self.x},{self.z}) contains no triplets")

    def sets(self):
        klo = max(self.z - self.b + 1, 0)
        for i in range(max(self.x, 0), self.x + self.b):
            for k in range(max(klo, i + 2), self.z + 1):
                yield TripletSet(i, k)

    @property
    def size(self):
        klo = max(self.z - self.b + 1, 0)
        total = 0
        for i in range(max(self.x, 0), self.x + self.b):
            for k in range(max(klo, i + 2), self.z + 1):
                total += k - i - 1
        return total


@dataclass(frozen=True)
class Round:
    """Mutually independent work units, processed concurrently.

    The unit at (1-based) position r belongs to worker r mod p; see
    worker_of.
    """
    units: tuple

    def worker_of(self, position, p):
        return (position + 1) % p

    @property
    def size(self):
        return sum(u.size for u in self.units)


def serial_order(n):
    """All C(n,3) triplets in lexicographic order."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    return itertools.combinations(range(n), 3)


def diagonal_rounds(n):
    """One round per anti-diagonal of the (i, k) grid of S_{i,k} sets.

    Two double loops: the first fixes i-origin x = 0 and walks z from
    n-1 down to 2 (the main diagonal and everything below it), the
    second fixes z = n-1 and walks x from 1 to n-3 (above the main
    diagonal).  Each inner loop emits S_{x+c, z-c} for c up to
    floor((z-x-2)/2), the largest c keeping the set nonempty.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    rounds = []
    x = 0
    for z in range(n - 1, 1, -1):
        g = (z - x - 2) // 2
        rounds.append(Round(tuple(TripletSet(x + c, z - c) for c in range(g + 1))))
    z = n - 1
    for x in range(1, n - 2):
        g = (z - x - 2) // 2
        rounds.append(Round(tuple(TripletSet(x + c, z - c) for c in range(g + 1))))
    return rounds


def tiled_rounds(n, b):
    """Block-diagonal version of diagonal_rounds with b x b tiles.

    Runs the same two double loops at block granularity.  The i-axis is
    cut at the untiled loops' origins: the first double loop's leading
    block is the clipped single row i = 0 (tile base 1 - b), and the
    full-width blocks start at i = 1, so the second double loop's first
    tile sits at base x = 1 as in the untiled case.  Consecutive tiles
    of a round are offset by (+b, -b), so triplets from different tiles
    of a round still share at most one index.  b = 1 reduces to
    diagonal_rounds exactly.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if b < 1:
        raise ValueError(f"tile size must be >= 1, got {b}")
    rounds = []

    def inner(x, z):
        units = []
        c = 0
        while max(x + c * b, 0) + 2 <= z - c * b:
            units.append(Tile(x + c * b, z - c * b, b))
            c += 1
        return Round(tuple(units))

    x = 1 - b
    z = n - 1
    while z >= 2:
        rounds.append(inner(x, z))
        z -= b
    z = n - 1
    x = 1
    while x + 2 <= z:
        rounds.append(inner(x, z))
        x += b
    return rounds


def tile_triplets(tile, n):
    """Yield the tile's triplets in cube order.

    Middle indices j are consumed in contiguous blocks of length b
    spanning [x+1, z-1]; within each resulting b x b x b cube the loop
    nest is k (outer), j, i (innermost), so consecutive steps reuse
    columns of the column-major X storage.  Lattice points violating
    i < j < k are skipped.
    """
    x, z, b = tile.x, tile.z, tile.b
    if z > n - 1:
        raise ValueError(f"tile ({x},{z}) out of range for n={n}")
    klo = max(z - b + 1, 0)
    ilo = max(x, 0)
    for jb in range(x + 1, z, b):
        je = min(jb + b - 1, z - 1)
        for k in range(klo, z + 1):
            for j in range(max(jb, 1), min(je, k - 1) + 1):
                for i in range(ilo, min(x + b - 1, j - 1) + 1):
                    yield (i, j, k)


def unit_triplets(unit, n):
    if isinstance(unit, Tile):
        return tile_triplets(unit, n)
    return unit.triplets()


class WorkerPlan:
    """Static assignment of round units to workers.

    A pure function of (rounds, p): the unit at 1-based position r of
    each round goes to worker r mod p, and each worker processes its
    units of a round in position order.  Every triplet is therefore
    visited by the same worker, in the same order, on every pass.
    """

    def __init__(self, rounds, p):
        if p < 1:
            raise ValueError(f"need at least one worker, got {p}")
        self.p = p
        self.rounds = rounds
        self.by_round = []
        for rnd in rounds:
            per_worker = [[] for _ in range(p)]
            for pos, unit in enumerate(rnd.units):
                per_worker[rnd.worker_of(pos, p)].append(unit)
            self.by_round.append(per_worker)

    def worker_units(self, w):
        """All units of worker w across rounds, in visit order."""
        for per_worker in self.by_round:
            yield from per_worker[w]

    def worker_triplets(self, w, n):
        for unit in self.worker_units(w):
            yield from unit_triplets(unit, n)

    def worker_load(self, w):
        return sum(u.size for u in self.worker_units(w))


def worker_plan(rounds, p):
    return WorkerPlan(rounds, p)


def verify_partition(rounds, n):
    """Every triplet appears in exactly one unit across all rounds."""
    seen = set()
    count = 0
    for rnd in rounds:
        for unit in rnd.units:
            for t in unit_triplets(unit, n):
                count += 1
                seen.add(t)
    expected = n * (n - 1) * (n - 2) // 6
    return count == expected and len(seen) == expected


def verify_independence(rounds, n):
    """No two triplets from different units of a round share two indices.

    Sharing two indices means sharing a variable pair, so it suffices
    to check that each index pair occurring in a round occurs in only
    one of its units.
    """
    for rnd in rounds:
        owner = {}
        for uidx, unit in enumerate(rnd.units):
            for (i, j, k) in unit_triplets(unit, n):
                for pair in ((i, j), (i, k), (j, k)):
                    prev = owner.setdefault(pair, uidx)
                    if prev != uidx:
                        return False
    return True
