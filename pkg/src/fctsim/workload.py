"""Empirical flow-size distributions and Poisson flow arrival generation.

Flow sizes are denominated in 1500-byte packets throughout.  A
distribution is a discrete empirical CDF: an ordered list of (size,
cumulative probability) atoms.  Sampling is inverse-CDF over the atoms
only, so the sampler and the analytic sums share the identical support.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

PACKET_BYTES = 1500

BUILTIN_NAMES = ("web_search", "data_mining")


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class FlowSizeDistribution:
    """Discrete empirical CDF of flow sizes in packets."""

    name: str
    sizes: tuple[int, ...]
    cum: tuple[float, ...]

    def __post_init__(self):
        if not self.sizes:
            raise WorkloadError("distribution has no atoms")
        if any(s < 1 for s in self.sizes):
            raise WorkloadError("flow sizes must be >= 1 packet")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise WorkloadError("sizes must be strictly increasing")
        if any(b <= a for a, b in zip(self.cum, self.cum[1:])):
            raise WorkloadError("cumulative probabilities must be strictly increasing")
        if self.cum[0] <= 0.0 or abs(self.cum[-1] - 1.0) > 1e-12:
            raise WorkloadError("cumulative probabilities must end at 1.0")

    @property
    def probabilities(self) -> tuple[float, ...]:
        prev = 0.0
        out = []
        for c in self.cum:
            out.append(c - prev)
            prev = c
        return tuple(out)

    def pmf(self) -> list[tuple[int, float]]:
        return list(zip(self.sizes, self.probabilities))

    def mean(self) -> float:
        return sum(x * p for x, p in self.pmf())

    def cdf(self, x: float) -> float:
        """F(x): probability that a flow is <= x packets."""
        i = bisect.bisect_right(self.sizes, x)
        return self.cum[i - 1] if i > 0 else 0.0

    def byte_fraction_leq(self, threshold: int) -> float:
        """Fraction of total bytes carried by flows of size <= threshold."""
        total = self.mean()
        if total <= 0.0:
            raise WorkloadError("distribution has zero mean")
        return sum(x * p for x, p in self.pmf() if x <= threshold) / total

    def count_fraction_leq(self, threshold: float) -> float:
        return self.cdf(threshold)

    def sample(self, rng: np.random.Generator) -> int:
        """Inverse-CDF draw; returns one of the atoms."""
        u = rng.random()
        return self.sizes[bisect.bisect_right(self.cum, u)]

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        idx = np.searchsorted(np.asarray(self.cum), u, side="right")
        return np.asarray(self.sizes)[idx]

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# {self.name}\n")
            for x, c in zip(self.sizes, self.cum):
                fh.write(f"{x} {c!r}\n")


def load_distribution(path: str | Path, name: str | None = None) -> FlowSizeDistribution:
    """Parse a distribution file: one `size_packets cum_prob` pair per line,
    ascending, `#` starts a comment."""
    sizes, cum = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise WorkloadError(f"{path}:{lineno}: expected 'size cum_prob', got {raw!r}")
            sizes.append(int(parts[0]))
            cum.append(float(parts[1]))
    return FlowSizeDistribution(name or Path(path).stem, tuple(sizes), tuple(cum))


def builtin_distribution(name: str) -> FlowSizeDistribution:
    """Return one of the bundled CDF tables (web_search or data_mining)."""
    if name not in BUILTIN_NAMES:
        raise WorkloadError(f"unknown workload {name!r}; choose from {BUILTIN_NAMES}")
    ref = resources.files("fctsim.data").joinpath(f"{name}.txt")
    with resources.as_file(ref) as path:
        return load_distribution(path, name)


def resolve_workload(name_or_path: str) -> FlowSizeDistribution:
    if name_or_path in BUILTIN_NAMES:
        return builtin_distribution(name_or_path)
    if Path(name_or_path).exists():
        return load_distribution(name_or_path)
    raise WorkloadError(f"workload {name_or_path!r} is neither builtin nor a file")


@dataclass(frozen=True)
class TrafficSpec:
    """Offered-load parameterization of a Poisson flow arrival process.

    `link_capacity` is in packets per second; `load` is the fraction of
    one host uplink consumed on average, so the per-source arrival rate
    is load * capacity / E[flow size].
    """

    dist: FlowSizeDistribution
    load: float
    link_capacity: float
    mean_size: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.load < 1.0:
            raise WorkloadError(f"load must be in (0, 1), got {self.load}")
        if self.link_capacity <= 0:
            raise WorkloadError("link capacity must be positive")
        object.__setattr__(self, "mean_size", self.dist.mean())

    @property
    def arrival_rate(self) -> float:
        """Flows per second per source host."""
        return self.load * self.link_capacity / self.mean_size


def next_interarrival(spec: TrafficSpec, rng: np.random.Generator) -> float:
    """Exponential interarrival with mean 1/arrival_rate."""
    return rng.exponential(1.0 / spec.arrival_rate)


def host_stream(seed: int, host_id: int) -> np.random.Generator:
    """Independent per-host RNG stream derived from (scenario seed, host id).

    Philox is counter-based, so streams are independent regardless of the
    order in which events interleave between hosts.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, host_id))))
