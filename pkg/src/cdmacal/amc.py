"""Adaptive modulation and coding: mode tables and constellation capacity.

A transmission mode pairs a unit-energy constellation with a spectral
efficiency (bps/Hz) and an SNR threshold (dB).  The receiver picks the
highest-rate mode whose threshold the post-detection SNR meets, so the
thresholds partition the SNR axis into operating regions.

Constellation-constrained capacity over a complex AWGN channel with SNR
gamma is

    I(gamma) = log2 |M| - log2(e)
               - (1/|M|) sum_b E_v[ log2 sum_b' exp(-|v + sqrt(gamma) (b - b')|^2) ]

with v drawn from the unit-variance circular complex Gaussian density
exp(-|v|^2)/pi.  The expectation is estimated by Monte Carlo, stratified
over the transmitted symbol b and stabilised with log-sum-exp.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import ConfigError
from .units import db_to_linear

_LOG2E = math.log2(math.e)

_DEFAULT_ROWS = (
    (0, "bpsk", 0.0, -math.inf),
    (1, "bpsk", 0.5, -2.80),
    (2, "qpsk", 1.0, 0.19),
    (3, "qpsk", 1.5, 3.39),
    (4, "16-qam", 2.25, 6.20),
    (5, "16-qam", 3.0, 9.30),
    (6, "64-qam", 4.5, 14.37),
)


def constellation_points(name):
    """Return the unit-average-energy points of a named constellation.

    Supported names: ``bpsk``, ``qpsk``, ``16-qam``, ``64-qam`` (dashes
    optional, case-insensitive).
    """
    key = name.lower().replace("-", "").replace("_", "")
    if key == "bpsk":
        pts = np.array([1.0, -1.0], dtype=complex)
    elif key == "qpsk":
        pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2)
    elif key in ("16qam", "64qam"):
        side = 4 if key == "16qam" else 8
        lv = np.arange(-(side - 1), side, 2, dtype=float)
        pts = (lv[:, None] + 1j * lv[None, :]).ravel()
        pts = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
    else:
        raise ConfigError(f"unknown constellation {name!r}")
    pts.flags.writeable = False
    return pts


@dataclass(frozen=True)
class Mode:
    """One AMC mode: constellation, code-rate-scaled efficiency, SNR switch point."""

    index: int
    label: str
    rate_bps_hz: float
    threshold_db: float
    points: np.ndarray = field(compare=False, repr=False)

    @property
    def constellation_size(self):
        return len(self.points)


class ModeTable:
    """Validated, ordered collection of AMC modes.

    Mode 0 must be the outage mode (rate 0, threshold -inf dB); rates and
    thresholds must be strictly increasing; every constellation must have
    unit average energy.
    """

    def __init__(self, modes):
        modes = tuple(modes)
        if not modes:
            raise ConfigError("mode table is empty")
        for i, m in enumerate(modes):
            if m.index != i:
                raise ConfigError(f"mode {m.label!r} has index {m.index}, expected {i}")
            energy = float(np.mean(np.abs(m.points) ** 2))
            if abs(energy - 1.0) > 1e-9:
                raise ConfigError(
                    f"mode {i} constellation has average energy {energy:.6g}, expected 1")
        if modes[0].rate_bps_hz != 0.0 or not math.isinf(modes[0].threshold_db):
            raise ConfigError("mode 0 must be the outage mode: rate 0, threshold -inf")
        for a, b in zip(modes, modes[1:]):
            if not b.rate_bps_hz > a.rate_bps_hz:
                raise ConfigError(
                    f"rates must be strictly increasing: mode {b.index} has "
                    f"{b.rate_bps_hz} after {a.rate_bps_hz}")
            if not b.threshold_db > a.threshold_db:
                raise ConfigError(
                    f"thresholds must be strictly increasing: mode {b.index} has "
                    f"{b.threshold_db} dB after {a.threshold_db} dB")
        self.modes = modes
        self.rates_bps_hz = np.array([m.rate_bps_hz for m in modes])
        self.thresholds_db = np.array([m.threshold_db for m in modes])
        self.thresholds_linear = db_to_linear(self.thresholds_db)
        for arr in (self.rates_bps_hz, self.thresholds_db, self.thresholds_linear):
            arr.flags.writeable = False

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @classmethod
    def from_rows(cls, rows):
        """Build a table from (index, constellation_name, rate, threshold_db) rows."""
        return cls(Mode(int(i), str(lab), float(r), float(t), constellation_points(lab))
                   for i, lab, r, t in rows)


def default_mode_table():
    """Seven-mode table used by the HIPERLAN/2-family link adaptation schemes."""
    return ModeTable.from_rows(_DEFAULT_ROWS)


def select_mode(table, gamma):
    """Index of the highest-rate mode whose linear SNR threshold is <= gamma.

    Intervals are closed at the lower threshold: gamma exactly equal to a
    switch point selects the higher mode.  gamma must be >= 0 (linear scale).
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("gamma must be a nonnegative linear SNR")
    idx = np.searchsorted(table.thresholds_linear, g, side="right") - 1
    return int(idx) if idx.ndim == 0 else idx


@dataclass(frozen=True)
class CapacityEstimate:
    """Monte Carlo capacity estimate with its standard error."""

    value_bps_hz: float
    std_err: float
    samples: int
    capped: bool = False


def _as_points(constellation):
    if isinstance(constellation, Mode):
        return constellation.points
    if isinstance(constellation, str):
        return constellation_points(constellation)
    pts = np.asarray(constellation, dtype=complex)
    if pts.ndim != 1 or len(pts) < 1:
        raise ValueError("constellation must be a 1-d point set")
    return pts


def _draw_noise(rng, n_points, n_per_b):
    z = rng.standard_normal((n_points, n_per_b)) + 1j * rng.standard_normal((n_points, n_per_b))
    return z / math.sqrt(2)


def _capacity_mc(points, gamma, noise):
    """Capacity estimate (value, std_err) from a fixed noise draw.

    noise has shape (len(points), n); reusing the same draw across gamma
    values gives a smooth deterministic function of gamma, which the
    threshold solver exploits.
    """
    m = len(points)
    log2m = math.log2(m)
    diff = math.sqrt(gamma) * (points[:, None] - points[None, :])
    total = 0.0
    var_sum = 0.0
    n = noise.shape[1]
    for b in range(m):
        z = noise[b][:, None] + diff[b][None, :]
        t = logsumexp(-(z.real ** 2 + z.imag ** 2), axis=1)
        x = log2m - _LOG2E - t / math.log(2)
        total += float(np.mean(x))
        var_sum += float(np.var(x, ddof=1)) / n
    value = total / m
    std_err = math.sqrt(var_sum) / m
    return value, std_err


def constellation_capacity(constellation, gamma, *, target_std_err=None,
                           samples=200_000, max_samples=3_200_000,
                           seed=None, rng=None):
    """Constellation-constrained capacity at linear SNR gamma, in bps/Hz.

    Parameters
    ----------
    constellation : str, Mode, or complex array
        Point set (or its name) with unit average energy.
    gamma : float
        Post-detection SNR, linear scale, >= 0.  ``inf`` returns log2 |M|
        exactly.
    target_std_err : float, optional
        Keep doubling the sample count until the standard error drops below
        this, or ``max_samples`` is hit (then ``capped`` is set).
    samples : int
        Noise samples per batch, split evenly over the constellation points.
    seed, rng
        Either a seed or an existing ``numpy.random.Generator``.

    Returns
    -------
    CapacityEstimate
        The estimate is floored at zero: the raw mean can dip below zero
        only near gamma = 0 where the true capacity is 0.
    """
    pts = _as_points(constellation)
    if not (gamma >= 0):
        raise ValueError("gamma must be a nonnegative linear SNR")
    m = len(pts)
    if math.isinf(gamma):
        return CapacityEstimate(math.log2(m), 0.0, 0)
    if rng is None:
        rng = np.random.default_rng(seed)

    n_per_b = max(1, -(-samples // m))
    total_n = 0
    estimates = []
    while True:
        noise = _draw_noise(rng, m, n_per_b)
        val, se = _capacity_mc(pts, gamma, noise)
        estimates.append((val, se, n_per_b * m))
        total_n += n_per_b * m
        weights = np.array([n for _, _, n in estimates], dtype=float)
        vals = np.array([v for v, _, _ in estimates])
        ses = np.array([s for _, s, _ in estimates])
        w = weights / weights.sum()
        value = float(np.sum(w * vals))
        std_err = float(np.sqrt(np.sum((w * ses) ** 2)))
        if target_std_err is None or std_err <= target_std_err:
            capped = False
            break
        if total_n >= max_samples:
            capped = True
            break
    return CapacityEstimate(max(0.0, value), std_err, total_n, capped)


@dataclass(frozen=True)
class ThresholdCheck:
    """Outcome of solving capacity(gamma) = rate for one mode."""

    mode_index: int
    label: str
    rate_bps_hz: float
    table_db: float
    solved_db: float
    error_db: float
    std_err: float
    solvable: bool
    within_tol: bool


def verify_thresholds(table, *, tol_db=0.3, target_std_err=0.005,
                      bracket_db=8.0, seed=1009):
    """Solve capacity = rate for every nonzero-rate mode and compare to the table.

    A common noise draw is reused across the root search for each mode, so
    the Monte Carlo capacity is a deterministic monotone function of gamma
    and Brent's method applies.  Modes whose rate is not bracketed within
    ``bracket_db`` of the table value are reported unsolvable rather than
    clamped.
    """
    rng = np.random.default_rng(seed)
    checks = []
    for mode in table:
        if mode.rate_bps_hz <= 0:
            continue
        pts = mode.points
        m = len(pts)
        pilot = _draw_noise(rng, m, max(1, 40_000 // m))
        _, pilot_se = _capacity_mc(pts, db_to_linear(mode.threshold_db), pilot)
        n_pilot = pilot.shape[1] * m
        n_needed = int(n_pilot * (pilot_se / target_std_err) ** 2 * 1.4) + m
        n_per_b = max(pilot.shape[1], -(-n_needed // m))
        noise = _draw_noise(rng, m, n_per_b)

        lo_db = mode.threshold_db - bracket_db
        hi_db = mode.threshold_db + bracket_db
        g = lambda x_db: _capacity_mc(pts, db_to_linear(x_db), noise)[0] - mode.rate_bps_hz
        g_lo, g_hi = g(lo_db), g(hi_db)
        if g_lo >= 0 or g_hi <= 0:
            checks.append(ThresholdCheck(mode.index, mode.label, mode.rate_bps_hz,
                                         mode.threshold_db, math.nan, math.nan,
                                         math.nan, False, False))
            continue
        solved_db = brentq(g, lo_db, hi_db, xtol=1e-4)
        _, se = _capacity_mc(pts, db_to_linear(solved_db), noise)
        err = abs(solved_db - mode.threshold_db)
        checks.append(ThresholdCheck(mode.index, mode.label, mode.rate_bps_hz,
                                     mode.threshold_db, float(solved_db), float(err),
                                     float(se), True, bool(err <= tol_db)))
    return checks
