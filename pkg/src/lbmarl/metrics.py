"""Throughput metrics and the scalar reward built from delivered-traffic ledgers.

Ledgers are per-UE delivered megabits within a window of ``T`` seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError


def _throughputs(ledgers, T: float) -> np.ndarray:
    if not T > 0:
        raise MetricError(f"window T must be positive, got {T}")
    a = np.asarray(ledgers, dtype=float).ravel()
    if a.size == 0:
        raise MetricError("metric undefined for an empty UE set")
    return a / T


def compute_g_aver(ledgers, T: float, n_ues: int | None = None) -> float:
    """Average throughput (1/N_U) sum_i A_i / T in Mbps."""
    x = _throughputs(ledgers, T)
    n = x.size if n_ues is None else n_ues
    if n < 1:
        raise MetricError("n_ues must be >= 1")
    return float(x.sum() / n)


def compute_g_min(ledgers, T: float) -> float:
    return float(_throughputs(ledgers, T).min())


def compute_g_sd(ledgers, T: float, n_ues: int | None = None) -> float:
    """Population standard deviation of per-UE throughput (plain, not reciprocal)."""
    x = _throughputs(ledgers, T)
    n = x.size if n_ues is None else n_ues
    if n < 1:
        raise MetricError("n_ues must be >= 1")
    mean = x.sum() / n
    return float(np.sqrt(((x - mean) ** 2).sum() / n))


def compute_reward(g_aver: float, g_min: float, g_sd: float) -> float:
    return g_aver + g_min - g_sd


@dataclass(frozen=True)
class MetricsReport:
    g_aver: float
    g_min: float
    g_sd: float
    reward: float
    per_bs: tuple = field(default=())  # one (g_aver, g_min, g_sd, reward) tuple per BS

    @property
    def bs_rewards(self) -> np.ndarray:
        return np.array([row[3] for row in self.per_bs], dtype=float)

    def as_dict(self) -> dict:
        return {"g_aver": self.g_aver, "g_min": self.g_min, "g_sd": self.g_sd, "reward": self.reward}


ZERO = (0.0, 0.0, 0.0, 0.0)


def summarize(ledgers, T: float) -> tuple[float, float, float, float]:
    """(g_aver, g_min, g_sd, reward) of one UE population; all zeros when it is empty.

    Same arithmetic as the individual metric functions, without re-validating
    the input for every metric.
    """
    x = np.asarray(ledgers, dtype=float)
    if x.size == 0:
        return ZERO
    if not T > 0:
        raise MetricError(f"window T must be positive, got {T}")
    x = x / T
    n = x.size
    g_aver = float(x.sum() / n)
    g_min = float(x.min())
    g_sd = float(np.sqrt(((x - x.sum() / n) ** 2).sum() / n))
    return g_aver, g_min, g_sd, compute_reward(g_aver, g_min, g_sd)


def metrics_report(ledgers, T: float, ue_bs, n_bs: int) -> MetricsReport:
    """Network-wide metrics plus the same four values over each BS's UEs.

    ``ue_bs`` assigns every ledger entry to a BS; a BS with no measured UEs
    reports zeros, as does an empty network.
    """
    ledgers = np.asarray(ledgers, dtype=float)
    ue_bs = np.asarray(ue_bs)
    per_bs = tuple(summarize(ledgers[ue_bs == k], T) for k in range(n_bs))
    return MetricsReport(*summarize(ledgers, T), per_bs=per_bs)
