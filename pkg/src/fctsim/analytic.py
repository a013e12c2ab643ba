"""Closed-form M/G/1 flow-completion-time model.

All quantities are normalized: link capacity is 1 packet per unit time,
flow sizes are in packets, and an FCT of 1.0 means "as fast as an
uncontended transfer".  Short flows (<= S_L packets) are modeled in
slow start; large flows send fixed bursts of the maximum window M.

Replication halves nothing directly -- it lowers the *effective load*
short flows experience from rho to (1+eps)^2 * rho^2, where eps is the
byte fraction contributed by short flows.  Every formula here comes in
an unreplicated and a replicated variant built on that substitution.

Integrals over the flow-size density are evaluated as exact sums over
the discrete empirical support, so there is no quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .workload import FlowSizeDistribution

LN10 = math.log(10.0)

#: Tail constant: one slow-start round at the 99th-percentile delay
#: (2*ln10 * E[W]) and the rest at E[W] contributes (2*ln10 - 1) extra
#: units of mean queueing delay.
TAIL_EXTRA = 2.0 * LN10 - 1.0


class ModelError(ValueError):
    """Raised when parameters put a queue outside its stable domain."""


@dataclass(frozen=True)
class ModelParams:
    """Parameter set feeding every analytic formula.

    k: initial window (packets); M: maximum window (packets);
    S_L: large-flow threshold (packets); rho: offered load;
    epsilon: fraction of total bytes from short flows.
    """

    k: int = 12
    M: int = 44
    S_L: int = 68
    rho: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 < self.k <= self.M <= self.S_L:
            raise ModelError(f"need 0 < k <= M <= S_L, got k={self.k} M={self.M} S_L={self.S_L}")
        if not 0.0 <= self.rho < 1.0:
            raise ModelError(f"load must satisfy 0 <= rho < 1, got {self.rho}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ModelError(f"epsilon must satisfy 0 <= epsilon < 1, got {self.epsilon}")

    def replicated_load_short(self) -> float:
        """Effective load seen by a replicated short flow."""
        return ((1.0 + self.epsilon) * self.rho) ** 2

    def replicated_load_large(self) -> float:
        """Load seen by large flows once short-flow bytes are doubled."""
        return (1.0 + self.epsilon) * self.rho


@dataclass(frozen=True)
class ShortFlowIntegrals:
    """The three distribution-dependent constants of the FCT formulas.

    I_mean: mean slow-start rounds per packet over short flows;
    N: the tail variant of I_mean (equals I_mean + (2ln10 - 1) * J);
    P: mean reciprocal size over large flows.
    """

    I_mean: float
    N: float
    P: float


def mean_queueing_delay(rho: float, M: float) -> float:
    """Pollaczek-Khintchine mean wait of an M/G/1 FCFS queue with fixed
    bursts of M packets: rho*M / (2*(1-rho)).  In packet-times."""
    if M <= 0:
        raise ModelError("burst size must be positive")
    if not 0.0 <= rho < 1.0:
        raise ModelError(f"queue unstable: rho={rho}")
    return rho * M / (2.0 * (1.0 - rho))


def slow_start_rounds(size: float, k: float) -> float:
    """Number of slow-start RTTs to move `size` packets starting from an
    initial window of k, as a continuous quantity: log2(size/k + 1)."""
    if size <= 0 or k <= 0:
        raise ModelError("size and initial window must be positive")
    return math.log2(size / k + 1.0)


def slow_start_rounds_ceil(size: int, k: int) -> int:
    """Whole-round count actually taken by a transfer (windows k, 2k, 4k...)."""
    rounds, sent, w = 0, 0, k
    while sent < size:
        sent += w
        w *= 2
        rounds += 1
    return rounds


def short_flow_byte_fraction(dist: FlowSizeDistribution, S_L: int) -> float:
    """epsilon: fraction of total bytes contributed by flows <= S_L."""
    if S_L <= 0:
        raise ModelError("S_L must be positive")
    return dist.byte_fraction_leq(S_L)


def short_flow_integrals(dist: FlowSizeDistribution, params: ModelParams) -> ShortFlowIntegrals:
    """Evaluate the three size integrals as exact sums over the atoms.

    I_mean and N condition on being a short flow (divide by F(S_L));
    P conditions on being large (divide by 1 - F(S_L)).
    """
    s_l, k = params.S_L, params.k
    f_sl = dist.cdf(s_l)
    short = [(x, p) for x, p in dist.pmf() if x <= s_l]
    large = [(x, p) for x, p in dist.pmf() if x > s_l]
    if not short:
        raise ModelError(f"distribution has no mass at or below S_L={s_l}")
    if not large:
        raise ModelError(f"distribution has no mass above S_L={s_l}")
    i_mean = sum(slow_start_rounds(x, k) / x * p for x, p in short) / f_sl
    n = sum((slow_start_rounds(x, k) + TAIL_EXTRA) / x * p for x, p in short) / f_sl
    p_int = sum(p / x for x, p in large) / (1.0 - f_sl)
    return ShortFlowIntegrals(I_mean=i_mean, N=n, P=p_int)


def _short_wait(params: ModelParams, replicated: bool) -> float:
    rho = params.replicated_load_short() if replicated else params.rho
    if rho >= 1.0:
        raise ModelError(f"effective short-flow load {rho} >= 1: model diverges")
    return rho * params.M / (2.0 * (1.0 - rho))


def _large_wait(params: ModelParams, replicated: bool) -> float:
    rho = params.replicated_load_large() if replicated else params.rho
    if rho >= 1.0:
        raise ModelError(f"effective large-flow load {rho} >= 1: model diverges")
    return rho * params.M / (2.0 * (1.0 - rho))


def mean_fct_short(params: ModelParams, integrals: ShortFlowIntegrals,
                   replicated: bool = False) -> float:
    """Mean normalized FCT of short flows: E[W] * I_mean + 1."""
    return _short_wait(params, replicated) * integrals.I_mean + 1.0


def mean_fct_large(rho: float, epsilon: float = 0.0, replicated: bool = False) -> float:
    """Mean normalized FCT of large flows; depends on load only."""
    eff = (1.0 + epsilon) * rho if replicated else rho
    if not 0.0 <= eff < 1.0:
        raise ModelError(f"effective load {eff} outside [0, 1)")
    return eff / (2.0 * (1.0 - eff)) + 1.0


def tail_queueing_delay(rho: float, M: float) -> float:
    """99th-percentile wait under the effective-bandwidth tail model:
    ln10 * rho*M/(1-rho), i.e. exactly 2*ln10 * E[W]."""
    return 2.0 * LN10 * mean_queueing_delay(rho, M)


def queue_wait_tail_prob(w: float, rho: float, M: float) -> float:
    """Approximate P(W > w) = exp(-w * 2(1-rho)/(rho*M))."""
    if not 0.0 <= rho < 1.0:
        raise ModelError(f"queue unstable: rho={rho}")
    if w <= 0.0:
        return 1.0
    if rho == 0.0:
        return 0.0
    return math.exp(-w * 2.0 * (1.0 - rho) / (rho * M))


def tail_fct_short(params: ModelParams, integrals: ShortFlowIntegrals,
                   replicated: bool = False) -> float:
    """99th-percentile normalized FCT of short flows: E[W] * N + 1."""
    return _short_wait(params, replicated) * integrals.N + 1.0


def tail_fct_large(params: ModelParams, integrals: ShortFlowIntegrals,
                   replicated: bool = False) -> float:
    """99th-percentile normalized FCT of large flows:
    mean large-flow FCT plus (2ln10 - 1) * E[W] * P."""
    mean = mean_fct_large(params.rho, params.epsilon, replicated)
    return mean + TAIL_EXTRA * _large_wait(params, replicated) * integrals.P


CURVES = (
    "mean_fct_short", "mean_fct_short_rep",
    "tail_fct_short", "tail_fct_short_rep",
    "mean_fct_large", "mean_fct_large_rep",
    "tail_fct_large", "tail_fct_large_rep",
)


def evaluate_curves(dist: FlowSizeDistribution, loads, k: int = 12, M: int = 44,
                    S_L: int = 68, epsilon: float | None = None):
    """Evaluate all eight analytic curves over a load grid.

    Yields (load, curve_name, value_or_None); None marks instability.
    epsilon defaults to the distribution's measured short-flow byte
    fraction but can be pinned (e.g. to 0.05).
    """
    eps = short_flow_byte_fraction(dist, S_L) if epsilon is None else epsilon
    for rho in loads:
        params = ModelParams(k=k, M=M, S_L=S_L, rho=rho, epsilon=eps)
        integrals = short_flow_integrals(dist, params)
        for curve in CURVES:
            rep = curve.endswith("_rep")
            base = curve[:-4] if rep else curve
            try:
                if base == "mean_fct_short":
                    val = mean_fct_short(params, integrals, rep)
                elif base == "tail_fct_short":
                    val = tail_fct_short(params, integrals, rep)
                elif base == "mean_fct_large":
                    val = mean_fct_large(rho, eps, rep)
                else:
                    val = tail_fct_large(params, integrals, rep)
            except ModelError:
                val = None
            yield rho, curve, val
