"""Brute-force queueing oracles.

These know nothing about topologies or transports: they grind out
waiting times of an M/G/1 FCFS queue (Poisson bursts, fixed service of
M packet-times, infinite buffer) directly from the Lindley recursion,
and measure what a Poisson probe stream sees across two independent
queues.  They exist to validate the closed forms in `analytic` from a
completely separate code path.

Time unit: one packet service time, so a burst of M packets takes M
time units to serve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class Mg1Config:
    rho: float
    burst_size: float = 44.0
    n_arrivals: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise OracleError(f"rho must be in (0, 1), got {self.rho}")
        if self.burst_size <= 0:
            raise OracleError("burst size must be positive")
        if self.n_arrivals < 1:
            raise OracleError("need at least one arrival")


@dataclass(frozen=True)
class Mg1Result:
    waits: np.ndarray          # time in queue before service start, per burst
    arrivals: np.ndarray       # arrival epochs
    utilization: float         # fraction of time the server was busy
    mean_in_system: float      # time-averaged number of bursts in system


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _lindley(interarrivals: np.ndarray, service: float) -> np.ndarray:
    """Waiting times W_n = U_n - min_{k<=n} U_k with U_n = sum(S - A)."""
    u = np.cumsum(service - interarrivals)
    running_min = np.minimum.accumulate(np.minimum(u, 0.0))
    return u - running_min


def simulate_mg1(config: Mg1Config) -> Mg1Result:
    """Waiting-time samples of the M/G/1 queue with fixed service M.

    Burst arrival rate is rho/M per packet-time, so offered load is rho.
    """
    m = config.burst_size
    lam = config.rho / m
    rng = _rng(config.seed)
    inter = rng.exponential(1.0 / lam, config.n_arrivals)
    waits = _lindley(inter, m)
    arrivals = np.cumsum(inter)
    departures = arrivals + waits + m
    horizon = departures[-1]
    utilization = config.n_arrivals * m / horizon
    mean_in_system = float(np.sum(departures - arrivals) / horizon)
    return Mg1Result(waits=waits, arrivals=arrivals,
                     utilization=float(utilization),
                     mean_in_system=mean_in_system)


def workload_at(arrivals: np.ndarray, waits: np.ndarray, service: float,
                probes: np.ndarray) -> np.ndarray:
    """Unfinished work (= virtual wait of a zero-service probe) at each
    probe epoch.  Probes must lie within the arrival horizon."""
    idx = np.searchsorted(arrivals, probes, side="right") - 1
    v = np.zeros_like(probes)
    has_prev = idx >= 0
    i = idx[has_prev]
    backlog = waits[i] + service - (probes[has_prev] - arrivals[i])
    v[has_prev] = np.maximum(backlog, 0.0)
    return v


@dataclass(frozen=True)
class ReplicatedPairResult:
    min_waits: np.ndarray          # best of the two virtual waits per probe
    single_waits: np.ndarray       # queue 1's virtual wait per probe
    both_busy_fraction: float
    per_queue_busy: tuple[float, float]


def simulate_replicated_pair(config: Mg1Config, epsilon: float,
                             n_probes: int = 200_000) -> ReplicatedPairResult:
    """Two independent M/G/1 queues at load (1+epsilon)*rho each, sampled
    by a tagged Poisson probe stream that joins both without adding load.

    By PASTA the probes measure the stationary busy probability, and
    independence predicts a both-busy fraction of ((1+eps)*rho)^2.
    """
    eff = (1.0 + epsilon) * config.rho
    if eff >= 1.0:
        raise OracleError(f"replicated load (1+eps)*rho = {eff} >= 1: unstable")
    m = config.burst_size
    sub = Mg1Config(rho=eff, burst_size=m, n_arrivals=config.n_arrivals,
                    seed=config.seed)
    q1 = simulate_mg1(sub)
    q2 = simulate_mg1(Mg1Config(rho=eff, burst_size=m,
                                n_arrivals=config.n_arrivals,
                                seed=config.seed + 7_919))
    horizon = min(q1.arrivals[-1], q2.arrivals[-1])
    rng = _rng(config.seed + 104_729)
    # skip an initial warm-up slice so probes see the stationary queue
    probes = np.sort(rng.uniform(0.05 * horizon, horizon, n_probes))
    v1 = workload_at(q1.arrivals, q1.waits, m, probes)
    v2 = workload_at(q2.arrivals, q2.waits, m, probes)
    busy1 = v1 > 0.0
    busy2 = v2 > 0.0
    return ReplicatedPairResult(
        min_waits=np.minimum(v1, v2),
        single_waits=v1,
        both_busy_fraction=float(np.mean(busy1 & busy2)),
        per_queue_busy=(float(np.mean(busy1)), float(np.mean(busy2))))
