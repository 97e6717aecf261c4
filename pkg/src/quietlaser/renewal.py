"""Monte Carlo renewal trains of decay events and their counting statistics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import elementwise

from .dynamics import WaitingTimeLaw

_MAX_ROOT_ITER = 200


@dataclass(frozen=True)
class ExponentialLaw:
    """Memoryless waiting times; the Poisson (shot-noise) reference."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def mean_waiting_time(self) -> float:
        return 1.0 / self.rate

    def density(self, t):
        return self.rate * np.exp(-self.rate * np.asarray(t, dtype=float))

    def cdf(self, t):
        return -np.expm1(-self.rate * np.asarray(t, dtype=float))


def sample_waiting_time(law, rng: np.random.Generator, size=None):
    """Draw waiting times by inverting ``law.cdf`` with a bracketed root finder.

    The bracket starts at [0, 50 tau] and is doubled until it encloses every
    quantile. Works for any law exposing ``cdf`` and ``mean_waiting_time``.
    """
    u = rng.random(size)
    return _invert_cdf(law, u)


def _invert_cdf(law, u):
    u = np.asarray(u, dtype=float)
    shape = u.shape
    u = u.ravel()
    tau = law.mean_waiting_time
    t = np.zeros_like(u)
    todo = u > 0
    if not np.any(todo):
        return t.reshape(shape)
    uu = u[todo]
    hi = np.full_like(uu, 50.0 * tau)
    for _ in range(64):
        short = law.cdf(hi) < uu
        if not np.any(short):
            break
        hi[short] *= 2.0
    else:
        raise RuntimeError("could not bracket the waiting-time quantile")

    res = elementwise.find_root(
        lambda x, q: law.cdf(x) - q,
        (np.zeros_like(uu), hi),
        args=(uu,),
        tolerances=dict(xatol=1e-12 * tau, xrtol=0.0, fatol=0.0, frtol=0.0),
        maxiter=_MAX_ROOT_ITER,
    )
    if not np.all(res.success):
        raise RuntimeError(
            f"inverse-CDF root finding failed for {np.count_nonzero(~res.success)} draws"
        )
    t[todo] = res.x
    return t.reshape(shape)


@dataclass
class EventTrain:
    timestamps: np.ndarray
    horizon: float
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        ts = self.timestamps
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if ts.size:
            if ts[0] < 0 or ts[-1] > self.horizon:
                raise ValueError("timestamps must lie in [0, horizon]")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return self.timestamps.size

    @property
    def rate(self) -> float:
        return self.timestamps.size / self.horizon

    def to_csv(self, path) -> None:
        header = {"horizon": repr(self.horizon), "seed": self.seed, "params": self.params}
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            for t in self.timestamps.tolist():
                fh.write(repr(t) + "\n")

    @classmethod
    def from_csv(cls, path) -> "EventTrain":
        text = Path(path).read_text().splitlines()
        if not text or not text[0].startswith("#"):
            raise ValueError("missing event-train header line")
        header = json.loads(text[0][1:])
        ts = np.array([float(line) for line in text[1:] if line.strip()], dtype=float)
        return cls(ts, float(header["horizon"]), header.get("seed"), header.get("params", {}))


def generate_event_train(law, horizon: float, seed: int) -> EventTrain:
    """Ordinary renewal process: cumulative sums of i.i.d. waiting times up to ``horizon``.

    Uses ``numpy.random.default_rng(seed)`` (PCG64); identical seeds give
    bit-identical trains.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    tau = law.mean_waiting_time
    chunk = int(horizon / tau * 1.05) + 64
    pieces = []
    t_last = 0.0
    while True:
        gaps = sample_waiting_time(law, rng, chunk)
        times = t_last + np.cumsum(gaps)
        inside = times <= horizon
        pieces.append(times[inside])
        if not inside.all():
            break
        t_last = times[-1]
        chunk = max(64, int((horizon - t_last) / tau * 1.05) + 64)
    params = _law_params(law)
    return EventTrain(np.concatenate(pieces), float(horizon), seed, params)


def _law_params(law) -> dict:
    if isinstance(law, WaitingTimeLaw):
        c = law.coupling
        return {"law": "two-level", "gamma": c.gamma, "rabi_sq": c.rabi_sq, "a": c.a}
    if isinstance(law, ExponentialLaw):
        return {"law": "exponential", "rate": law.rate}
    return {"law": type(law).__name__}


@dataclass(frozen=True)
class CountStatistics:
    window: float
    mean_count: float
    fano: float
    std_err: float
    n_windows: int

    def z_score(self, target: float) -> float:
        return (self.fano - target) / self.std_err


def window_counts(train: EventTrain, window: float) -> np.ndarray:
    n = int(math.floor(train.horizon / window * (1 + 1e-12)))
    edges = window * np.arange(n + 1)
    return np.diff(np.searchsorted(train.timestamps, edges, side="left"))


def _jackknife_ratio(values: np.ndarray) -> tuple[float, float]:
    """Fano factor of ``values`` and its delete-one jackknife standard error."""
    c = values.astype(float)
    n = c.size
    s1, s2 = c.sum(), (c * c).sum()
    mean = s1 / n
    fano = (s2 - n * mean**2) / (n - 1) / mean
    m_i = (s1 - c) / (n - 1)
    v_i = (s2 - c * c - (n - 1) * m_i**2) / (n - 2)
    f_i = v_i / m_i
    se = math.sqrt((n - 1) / n * np.sum((f_i - f_i.mean()) ** 2))
    return fano, se


def fano_factor(train: EventTrain, window: float) -> CountStatistics:
    """Variance-to-mean ratio of event counts in disjoint windows of length ``window``."""
    if not window > 0:
        raise ValueError("window must be positive")
    counts = window_counts(train, window)
    if counts.size < 10:
        raise ValueError(f"only {counts.size} windows fit in the horizon; need at least 10")
    if counts.sum() == 0:
        raise ValueError("no events in the counted windows")
    fano, se = _jackknife_ratio(counts)
    return CountStatistics(window, float(counts.mean()), float(fano), float(se), int(counts.size))


@dataclass(frozen=True)
class CorrelationEstimate:
    lag_edges: np.ndarray
    g_minus_one: np.ndarray
    std_err: np.ndarray
    rate: float


def correlation_estimate(train: EventTrain, max_lag: float, bin_width: float) -> CorrelationEstimate:
    """Histogram estimate of g(t) - 1 from all ordered event pairs with 0 < t_j - t_i <= max_lag.

    g(t) is the rate of later events at lag t given an event at 0, over the
    mean rate. Only events at least ``max_lag`` before the horizon serve as
    origins, so every origin sees the full lag range.
    """
    if not (max_lag > 0 and bin_width > 0):
        raise ValueError("max_lag and bin_width must be positive")
    if max_lag >= train.horizon / 10:
        raise ValueError("max_lag must be shorter than a tenth of the horizon")
    ts = train.timestamps
    n_bins = int(round(max_lag / bin_width))
    edges = bin_width * np.arange(n_bins + 1)
    origins = ts[ts <= train.horizon - edges[-1]]
    if origins.size < 10:
        raise ValueError("too few events to estimate the correlation function")
    rate = ts.size / train.horizon
    # pairs with lag in (e_k, e_{k+1}], counted by shifting the whole train
    cum = np.array([np.searchsorted(ts, origins + e, side="right").sum() for e in edges], dtype=float)
    counts = np.diff(cum)
    norm = origins.size * rate * bin_width
    return CorrelationEstimate(edges, counts / norm - 1.0, np.sqrt(counts) / norm, float(rate))


@dataclass(frozen=True)
class SpectralEstimate:
    omega: np.ndarray
    psd: np.ndarray
    std_err: np.ndarray
    rate: float
    n_segments: int


def psd_estimate(
    train: EventTrain, omega_grid, bin_width: float, n_segments: int = 20
) -> SpectralEstimate:
    """Double-sided spectral density of the event-rate fluctuation (1/s).

    The train is binned at ``bin_width``, centred, cut into ``n_segments``
    equal segments and the periodograms are averaged (Bartlett). A Poisson
    train gives psd == rate at every frequency.
    """
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    if train.rate > 0 and bin_width > 0.2 / train.rate:
        raise ValueError("bin_width must not exceed a fifth of the mean waiting time")
    if n_segments < 20:
        raise ValueError("Bartlett averaging needs at least 20 segments")
    n_bins = int(train.horizon // bin_width)
    seg_len = n_bins // n_segments
    if seg_len < 2:
        raise ValueError("too few bins per segment")
    t_seg = seg_len * bin_width
    lo, hi = 2 * math.pi / t_seg, math.pi / bin_width
    if np.any(omega < lo * (1 - 1e-12)) or np.any(omega > hi * (1 + 1e-12)):
        raise ValueError(f"omega grid must lie within the resolvable band [{lo:.6g}, {hi:.6g}] rad/s")

    used = seg_len * n_segments
    edges = bin_width * np.arange(used + 1)
    counts = np.diff(np.searchsorted(train.timestamps, edges, side="left")).astype(float)
    rate = counts.sum() / (used * bin_width)
    x = (counts / bin_width - rate).reshape(n_segments, seg_len)

    k = np.arange(seg_len)
    per_seg = np.empty((n_segments, omega.size))
    for j, w in enumerate(omega):
        phase = np.exp(-1j * w * bin_width * k)
        per_seg[:, j] = np.abs(x @ phase) ** 2 * bin_width / seg_len
    psd = per_seg.mean(axis=0)
    # jackknife over segments of a plain mean reduces to std / sqrt(n)
    se = per_seg.std(axis=0, ddof=1) / math.sqrt(n_segments)
    return SpectralEstimate(omega, psd, se, float(rate), n_segments)
