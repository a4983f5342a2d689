"""Model Hamiltonians on chains and square lattices as Pauli sums.

Spin convention: the transverse-field Ising builder uses bare Pauli
matrices, the Heisenberg builder uses spin-1/2 operators S = sigma/2
(coefficient 1/4 per XX+YY+ZZ pair).  Quoted energies follow these
conventions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .pauli import PauliSumOperator


@dataclass(frozen=True)
class Lattice:
    """Chain or square lattice with derived NN/NNN bond lists.

    Bond lists contain each undirected bond exactly once; degenerate wraps on
    tiny periodic lattices (e.g. the two geometric N=2 chain bonds) are
    deduplicated so no coupling is double counted.
    """

    kind: str
    extents: tuple
    boundary: str = "open"
    nn_bonds: tuple = field(init=False)
    nnn_bonds: tuple = field(init=False)

    def __post_init__(self):
        if self.kind not in ("chain", "square"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.kind == "chain":
            nn, nnn = self._chain_bonds()
        else:
            nn, nnn = self._square_bonds()
        object.__setattr__(self, "nn_bonds", nn)
        object.__setattr__(self, "nnn_bonds", nnn)

    @property
    def n_sites(self) -> int:
        if self.kind == "chain":
            return self.extents[0]
        return self.extents[0] * self.extents[1]

    def _chain_bonds(self):
        (n,) = self.extents
        if n < 2:
            raise ValueError("chain needs at least 2 sites")
        periodic = self.boundary == "periodic"
        nn = set()
        nnn = set()
        for i in range(n):
            for dist, bucket in ((1, nn), (2, nnn)):
                j = i + dist
                if j < n:
                    bucket.add((i, j))
                elif periodic:
                    bucket.add(tuple(sorted((i, j % n))))
        nnn -= nn  # degenerate small rings where distance 2 wraps onto a NN pair
        return tuple(sorted(nn)), tuple(sorted(nnn))

    def _square_bonds(self):
        lx, ly = self.extents
        if lx < 2 or ly < 2:
            raise ValueError("square lattice needs extents >= 2")
        periodic = self.boundary == "periodic"
        if periodic and (lx % 2 or ly % 2):
            raise ValueError("periodic square lattice requires even extents")

        def site(x, y):
            return (x % lx) + lx * (y % ly)

        def in_range(x, y):
            return 0 <= x < lx and 0 <= y < ly

        nn = set()
        nnn = set()
        for y in range(ly):
            for x in range(lx):
                i = site(x, y)
                for dx, dy, bucket in ((1, 0, nn), (0, 1, nn), (1, 1, nnn), (1, -1, nnn)):
                    if periodic or in_range(x + dx, y + dy):
                        j = site(x + dx, y + dy)
                        if i != j:
                            bucket.add(tuple(sorted((i, j))))
        return tuple(sorted(nn)), tuple(sorted(nnn))


def chain(n: int, boundary: str = "open") -> Lattice:
    return Lattice("chain", (n,), boundary)


def square(lx: int, ly: int, boundary: str = "periodic") -> Lattice:
    return Lattice("square", (lx, ly), boundary)


def _two_site(letters: str, n: int, i: int, j: int) -> str:
    out = ["I"] * n
    out[i], out[j] = letters[0], letters[1]
    return "".join(out)


def _one_site(letter: str, n: int, i: int) -> str:
    out = ["I"] * n
    out[i] = letter
    return "".join(out)


def transverse_field_ising(lattice: Lattice, j: float, h: float) -> PauliSumOperator:
    """H = -J sum_<ij> Z_i Z_j - h sum_i X_i on a chain."""
    if lattice.kind != "chain":
        raise ValueError("transverse-field Ising builder expects a chain lattice")
    n = lattice.n_sites
    items = [(-float(j), _two_site("ZZ", n, a, b)) for a, b in lattice.nn_bonds]
    items += [(-float(h), _one_site("X", n, i)) for i in range(n)]
    return PauliSumOperator(n, items)


def j1j2_heisenberg(lattice: Lattice, j1: float, j2: float) -> PauliSumOperator:
    """H = J1 sum_<ij> S_i.S_j + J2 sum_<<ij>> S_i.S_j with S = sigma/2."""
    n = lattice.n_sites
    items = []
    for coupling, bonds in ((float(j1), lattice.nn_bonds), (float(j2), lattice.nnn_bonds)):
        for a, b in bonds:
            for pair in ("XX", "YY", "ZZ"):
                items.append((coupling / 4.0, _two_site(pair, n, a, b)))
    return PauliSumOperator(n, items)


def total_z(n: int) -> PauliSumOperator:
    """sum_i Z_i; commutes with the Heisenberg builder (magnetization sector)."""
    return PauliSumOperator(n, [(1.0, _one_site("Z", n, i)) for i in range(n)])
