"""Excitation-conserving truncated Fock spaces for an open chain.

States are occupation vectors (bosons per site).  A :class:`Basis` holds every
vector with a fixed total excitation number that a truncation scheme admits,
sorted lexicographically, together with a packed-integer index for O(1)
lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class MaxLevel:
    """Every site truncated to occupations ``0..m``."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"MaxLevel needs m >= 1, got {self.m}")

    @property
    def ceiling(self) -> int:
        return self.m

    def admits(self, counts: Sequence[int]) -> bool:
        return all(0 <= c <= self.m for c in counts)

    def __str__(self):
        return f"max:{self.m}"


@dataclass(frozen=True)
class Bands:
    """At most ``d`` doublons and ``t`` triplons, no occupation above 3."""

    d: int
    t: int

    def __post_init__(self):
        if self.d < 0 or self.t < 0:
            raise ValueError(f"Bands needs d, t >= 0, got ({self.d}, {self.t})")

    @property
    def ceiling(self) -> int:
        if self.t > 0:
            return 3
        return 2 if self.d > 0 else 1

    def admits(self, counts: Sequence[int]) -> bool:
        if any(c < 0 or c > 3 for c in counts):
            return False
        doublons = sum(1 for c in counts if c == 2)
        triplons = sum(1 for c in counts if c == 3)
        return doublons <= self.d and triplons <= self.t

    def __str__(self):
        return f"bands:{self.d},{self.t}"


TruncationScheme = Union[MaxLevel, Bands]


def parse_scheme(text: str) -> TruncationScheme:
    """Parse ``"max:2"``, ``"m2"``, ``"bands:2,1"`` or ``"[2,1]"``."""
    s = text.strip().lower().replace(" ", "")
    try:
        if s.startswith("max:"):
            return MaxLevel(int(s[4:]))
        if s.startswith("m") and s[1:].isdigit():
            return MaxLevel(int(s[1:]))
        if s.startswith("bands:"):
            d, t = s[6:].split(",")
            return Bands(int(d), int(t))
        if s.startswith("[") and s.endswith("]"):
            d, t = s[1:-1].split(",")
            return Bands(int(d), int(t))
    except ValueError as exc:
        raise ValueError(f"cannot parse truncation scheme {text!r}") from exc
    raise ValueError(f"cannot parse truncation scheme {text!r}")


def half_filling(n_sites: int) -> int:
    return n_sites // 2


def initial_pattern(n_sites: int, n_exc: int | None = None) -> tuple[int, ...]:
    """Excitations on every other site starting from the second, e.g. 01010."""
    if n_exc is None:
        n_exc = half_filling(n_sites)
    counts = [0] * n_sites
    slots = list(range(1, n_sites, 2)) + list(range(0, n_sites, 2))
    if n_exc > n_sites:
        raise ValueError("initial pattern holds at most one boson per site")
    for i in slots[:n_exc]:
        counts[i] = 1
    return tuple(counts)


def _bits_per_site(ceiling: int) -> int:
    return max(1, int(ceiling).bit_length())


def _generate(n_sites: int, n_exc: int, scheme: TruncationScheme) -> Iterator[tuple[int, ...]]:
    cap = scheme.ceiling
    if isinstance(scheme, Bands):
        d_max, t_max = scheme.d, scheme.t
    else:
        d_max = t_max = n_sites  # unconstrained

    prefix = [0] * n_sites

    def rec(site, remaining, d_left, t_left):
        sites_left = n_sites - site
        if remaining > cap * sites_left:
            return
        if site == n_sites:
            if remaining == 0:
                yield tuple(prefix)
            return
        for v in range(0, min(cap, remaining) + 1):
            if isinstance(scheme, Bands):
                if v == 2 and d_left == 0:
                    continue
                if v == 3 and t_left == 0:
                    continue
            prefix[site] = v
            yield from rec(site + 1, remaining - v,
                           d_left - (v == 2), t_left - (v == 3))
        prefix[site] = 0

    yield from rec(0, n_exc, d_max, t_max)


class Basis:
    """Enumerated truncated Fock space with fixed excitation number.

    Immutable after construction.  ``states`` is a ``(dim, N)`` int8 array in
    lexicographic order; ``codes`` holds the packed vectors, which sort in the
    same order.
    """

    def __init__(self, n_sites: int, n_exc: int, scheme: TruncationScheme):
        if n_sites < 1:
            raise ValueError("need at least one site")
        if n_exc < 0 or n_exc > n_sites * scheme.ceiling:
            raise ValueError(
                f"excitation number {n_exc} outside 0..{n_sites * scheme.ceiling}")
        self.n_sites = n_sites
        self.n_exc = n_exc
        self.scheme = scheme
        self.bits = _bits_per_site(scheme.ceiling)
        rows = list(_generate(n_sites, n_exc, scheme))
        states = np.array(rows, dtype=np.int8).reshape(len(rows), n_sites)
        states.setflags(write=False)
        self.states = states
        codes = self.pack(states)
        codes.setflags(write=False)
        self.codes = codes
        self._index = {int(c): k for k, c in enumerate(codes)}

    def __len__(self):
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def __repr__(self):
        return f"Basis(N={self.n_sites}, n_exc={self.n_exc}, scheme={self.scheme}, dim={self.dim})"

    def pack(self, counts) -> np.ndarray:
        """Packed integer code(s) for occupation vector(s), site 0 most significant."""
        arr = np.atleast_2d(np.asarray(counts, dtype=np.int64))
        shifts = self.bits * np.arange(self.n_sites - 1, -1, -1, dtype=np.int64)
        return (arr << shifts).sum(axis=1)

    def state_of(self, k: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.states[k])

    def index_of(self, counts: Sequence[int]) -> int:
        """Ordinal of an occupation vector; ``KeyError`` if not in the basis."""
        if len(counts) != self.n_sites:
            raise KeyError(tuple(counts))
        if any(c < 0 or c >= (1 << self.bits) for c in counts):
            raise KeyError(tuple(counts))
        return self._index[int(self.pack(counts)[0])]

    def lookup(self, codes: np.ndarray) -> np.ndarray:
        """Vectorised index lookup; returns -1 for codes not in the basis."""
        codes = np.asarray(codes, dtype=np.int64)
        pos = np.searchsorted(self.codes, codes)
        pos = np.clip(pos, 0, max(self.dim - 1, 0))
        if self.dim == 0:
            return np.full(codes.shape, -1, dtype=np.int64)
        found = self.codes[pos] == codes
        return np.where(found, pos, -1)

    @cached_property
    def qubit_mask(self) -> np.ndarray:
        """True for states with every occupation 0 or 1."""
        return np.all(self.states <= 1, axis=1)

    def labels(self) -> list[str]:
        return ["".join(str(int(c)) for c in row) for row in self.states]


def enumerate_basis(n_sites: int, n_exc: int, scheme: TruncationScheme) -> Basis:
    return Basis(n_sites, n_exc, scheme)


def _max_level_count(n_sites: int, n_exc: int, m: int) -> int:
    # coefficient of x^n_exc in (1 + x + ... + x^m)^n_sites
    poly = [1] + [0] * n_exc
    for _ in range(n_sites):
        nxt = [0] * (n_exc + 1)
        for k, c in enumerate(poly):
            if c:
                for v in range(0, min(m, n_exc - k) + 1):
                    nxt[k + v] += c
        poly = nxt
    return poly[n_exc]


def _multinomial(n: int, parts: Sequence[int]) -> int:
    rest = n - sum(parts)
    if rest < 0 or any(p < 0 for p in parts):
        return 0
    out = math.factorial(n) // math.factorial(rest)
    for p in parts:
        out //= math.factorial(p)
    return out


def band_dimension(n_sites: int, n_exc: int, doublons: int, triplons: int) -> int:
    """States with exactly the given doublon and triplon counts (rest singles)."""
    singles = n_exc - 2 * doublons - 3 * triplons
    if singles < 0:
        return 0
    return _multinomial(n_sites, (singles, doublons, triplons))


def dimension(n_sites: int, n_exc: int, scheme: TruncationScheme) -> int:
    """Closed-form size of ``enumerate_basis(n_sites, n_exc, scheme)``."""
    if n_exc < 0 or n_exc > n_sites * scheme.ceiling:
        raise ValueError(f"excitation number {n_exc} outside admissible range")
    if isinstance(scheme, MaxLevel):
        if scheme.m == 1:
            return math.comb(n_sites, n_exc)
        return _max_level_count(n_sites, n_exc, scheme.m)
    return sum(band_dimension(n_sites, n_exc, a, b)
               for a in range(scheme.d + 1) for b in range(scheme.t + 1))


# Fitted asymptotic dimensions at half filling.  "main" holds the
# complexity-figure fits, "appendix" the simulation-cost fits.
def dimension_estimate(n_sites: int, scheme: TruncationScheme, source: str = "main") -> float:
    """Fitted asymptotic Hilbert-space dimension at half filling.

    ``source="main"``: 2^N/sqrt(N) (qubits), 2.05^N (single doublon),
    0.15*2.42^N (qutrits).  ``source="appendix"``: 2^N/sqrt(pi N/2) (qubits),
    2^N, 2.1^N, 2.3^N for bands [1,0], [2,0], [2,1].
    """
    n = float(n_sites)
    if source not in ("main", "appendix"):
        raise ValueError(f"unknown estimate source {source!r}")
    if scheme == MaxLevel(1) or scheme == Bands(0, 0):
        if source == "main":
            return 2.0 ** n / math.sqrt(n)
        return 2.0 ** n / math.sqrt(math.pi * n / 2.0)
    if scheme == MaxLevel(2) and source == "main":
        return 0.15 * 2.42 ** n
    if scheme == Bands(1, 0):
        return 2.05 ** n if source == "main" else 2.0 ** n
    if scheme == Bands(2, 0):
        return 2.1 ** n
    if scheme == Bands(2, 1):
        return 2.3 ** n
    raise ValueError(f"no fitted estimate for {scheme} ({source})")


@dataclass(frozen=True)
class ResourceProfile:
    bytes_per_amplitude: int = 16
    sockets: int = 64
    bandwidth_per_socket: float = 6e9  # bytes / second
    swaps_per_step: int = 5
    steps: int = 1000

    def __post_init__(self):
        for name in ("bytes_per_amplitude", "sockets", "bandwidth_per_socket",
                     "swaps_per_step", "steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def resource_estimate(dim: int, profile: ResourceProfile) -> tuple[int, float]:
    """Memory for one state and bandwidth-bound communication time.

    Each swap moves the whole distributed state out of and back into every
    node, hence the factor 2.
    """
    memory = int(dim) * int(profile.bytes_per_amplitude)
    per_swap = 2.0 * memory / (profile.sockets * profile.bandwidth_per_socket)
    return memory, profile.steps * profile.swaps_per_step * per_swap


TABLE1_COLUMNS = ("2-levels", "2-levels truncated", "single doublon", "3-levels truncated")


def table1_row(n_sites: int, n_exc: int | None = None) -> dict:
    """One row of the dimension table at half filling (or a given n_exc)."""
    if n_exc is None:
        n_exc = half_filling(n_sites)
    return {
        "N": n_sites,
        "n_exc": n_exc,
        "2-levels": 2 ** n_sites,
        "2-levels truncated": dimension(n_sites, n_exc, MaxLevel(1)),
        "single doublon": dimension(n_sites, n_exc, Bands(1, 0)),
        "3-levels truncated": dimension(n_sites, n_exc, MaxLevel(2)),
    }
