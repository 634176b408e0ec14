"""BER/GMI accounting, horizontal curve gaps, and remap diagnostics.

GMI here is the bit-metric achievable rate of the chosen (possibly
mismatched) demapper: m minus the per-bit mean of log2(1 + exp(-(1-2b)*LLR)).
Horizontal gaps between two metric-vs-PSNR curves are measured by linear
interpolation at a common target value, which is how the shaping gain and
the detection losses are quantified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .demapper import AffineCompensation, DemapContext, demap

_LN2 = math.log(2.0)

GMI_MIN_SAMPLES = 100_000
_GMI_BLOCK = 131_072


@dataclass(frozen=True)
class SweepRecord:
    """One (PSNR, metric) measurement row."""

    psnr_db: float
    metric: str  # "ber" | "fer" | "gmi" | "evals_per_symbol"
    value: float
    stderr: float
    trials: int
    errors: int
    constellation: str
    demapper: str
    seed: int

    def __post_init__(self):
        if self.trials < 0 or self.errors < 0:
            raise ValueError("counters must be nonnegative")
        if self.metric in ("ber", "fer") and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.metric} must lie in [0, 1]")

    def key(self):
        return (self.psnr_db, self.metric, self.constellation, self.demapper)


def merge_records(a: SweepRecord, b: SweepRecord) -> SweepRecord:
    """Merge two counter-based (ber/fer) records of the same configuration."""
    if a.trials == 0:
        return b
    if b.trials == 0:
        return a
    if a.metric not in ("ber", "fer") or b.metric not in ("ber", "fer"):
        raise ValueError("only counter-based records (ber/fer) merge")
    if a.key() != b.key():
        raise ValueError(f"incompatible records: {a.key()} vs {b.key()}")
    trials = a.trials + b.trials
    errors = a.errors + b.errors
    p = errors / trials
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return replace(a, value=p, stderr=stderr, trials=trials, errors=errors)


def ber_accumulate(records) -> SweepRecord:
    """Associative, commutative merge of a stream of ber/fer records."""
    out = None
    for rec in records:
        out = rec if out is None else merge_records(out, rec)
    if out is None:
        raise ValueError("no records to accumulate")
    if out.trials > 0:
        p = out.errors / out.trials
        stderr = math.sqrt(max(p * (1.0 - p), 0.0) / out.trials)
        out = replace(out, value=p, stderr=stderr)
    return out


@dataclass
class MeanAccumulator:
    """Mergeable running mean/variance from (count, sum, sum of squares)."""

    n: int = 0
    s1: float = 0.0
    s2: float = 0.0

    def add(self, samples: np.ndarray) -> None:
        self.n += samples.size
        self.s1 += float(np.sum(samples))
        self.s2 += float(np.sum(samples.astype(np.float64) ** 2))

    def __add__(self, other: "MeanAccumulator") -> "MeanAccumulator":
        return MeanAccumulator(self.n + other.n, self.s1 + other.s1, self.s2 + other.s2)

    @property
    def mean(self) -> float:
        return self.s1 / self.n

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return float("inf")
        var = max(self.s2 / self.n - self.mean ** 2, 0.0)
        return math.sqrt(var / self.n)


@dataclass(frozen=True)
class GmiEstimate:
    value: float
    stderr: float
    samples: int


def gmi_symbol_scores(
    ctx: DemapContext,
    kind: str,
    n0: float,
    num: int,
    rng: np.random.Generator,
    comp: AffineCompensation | None = None,
) -> np.ndarray:
    """Per-symbol achievable-rate samples for one Monte Carlo block."""
    idx = rng.integers(0, ctx.M, size=num)
    x = ctx.constellation.points[idx]
    y = x + rng.normal(0.0, math.sqrt(n0 / 2.0), size=x.shape)
    frame = demap(kind, y, ctx, n0, comp=comp)
    signs = 1.0 - 2.0 * ctx.constellation.labels[idx].astype(np.float64)
    loss = np.logaddexp(0.0, -signs * frame.values) / _LN2
    return ctx.m - np.sum(loss, axis=1)


def gmi_estimate(
    ctx: DemapContext,
    kind: str,
    n0: float,
    samples: int,
    rng: np.random.Generator,
    comp: AffineCompensation | None = None,
) -> GmiEstimate:
    """Monte Carlo GMI with its standard error; deterministic given the rng."""
    if n0 <= 0.0:
        raise ValueError("n0 must be positive")
    if samples < GMI_MIN_SAMPLES:
        raise ValueError(f"GMI estimation needs at least {GMI_MIN_SAMPLES} samples")
    acc = MeanAccumulator()
    remaining = int(samples)
    while remaining > 0:
        block = min(remaining, _GMI_BLOCK)
        acc.add(gmi_symbol_scores(ctx, kind, n0, block, rng, comp=comp))
        remaining -= block
    return GmiEstimate(value=acc.mean, stderr=acc.stderr, samples=acc.n)


def horizontal_gap(curve_a, curve_b, target: float) -> float:
    """PSNR(curve_a) - PSNR(curve_b) at a common metric value, in dB.

    Curves are sequences of (psnr_db, value) pairs (or SweepRecords). Each
    curve must cross the target exactly once between grid points; the
    crossing is located by linear interpolation.
    """
    return _crossing_psnr(curve_a, target) - _crossing_psnr(curve_b, target)


def _as_xy(curve) -> np.ndarray:
    pts = []
    for item in curve:
        if isinstance(item, SweepRecord):
            pts.append((item.psnr_db, item.value))
        else:
            x, y = item
            pts.append((float(x), float(y)))
    arr = np.array(sorted(pts))
    if arr.shape[0] < 2:
        raise ValueError("need at least two curve points")
    return arr


def _crossing_psnr(curve, target: float) -> float:
    arr = _as_xy(curve)
    x, v = arr[:, 0], arr[:, 1]
    s = v - target
    hits = np.nonzero(s == 0.0)[0]
    if hits.size == 1:
        return float(x[hits[0]])
    cross = np.nonzero(s[:-1] * s[1:] < 0.0)[0]
    if cross.size + hits.size == 0:
        raise ValueError(f"target {target} outside the curve's range [{v.min()}, {v.max()}]")
    if cross.size + (hits.size > 0) > 1:
        raise ValueError("curve is not monotone around the target; crossing is ambiguous")
    i = int(cross[0])
    frac = (target - v[i]) / (v[i + 1] - v[i])
    return float(x[i] + frac * (x[i + 1] - x[i]))


@dataclass(frozen=True)
class ScatterDump:
    """Raw remap diagnostics: per-symbol rows plus per-point cluster centers.

    Channel coordinates throughout; ``qam_ref`` is the square-grid preimage
    of each transmitted symbol and ``remapped`` the inverse-mapped received
    point.
    """

    point_index: np.ndarray  # (N,)
    qam_ref: np.ndarray      # (N, 2)
    remapped: np.ndarray     # (N, 2)
    centers: np.ndarray      # (M, 2) mean remapped point per constellation point
    counts: np.ndarray       # (M,)

    @property
    def samples(self) -> int:
        return int(self.point_index.size)


def scatter_dump(
    ctx: DemapContext,
    n0: float,
    samples: int,
    rng: np.random.Generator,
    file=None,
) -> ScatterDump:
    """Sample the inverse-map output cloud and its per-point centers.

    With ``file`` set, writes the sample rows to that CSV and the centers
    to a sibling ``*_centers.csv``.
    """
    if n0 <= 0.0:
        raise ValueError("n0 must be positive")
    if samples < 1:
        raise ValueError("samples must be positive")
    idx = rng.integers(0, ctx.M, size=samples)
    x = ctx.constellation.points[idx]
    y = x + rng.normal(0.0, math.sqrt(n0 / 2.0), size=x.shape)
    z = ctx.unmap(y)
    ref = ctx.qam_grid.points[idx]
    counts = np.bincount(idx, minlength=ctx.M)
    sums = np.zeros((ctx.M, 2))
    np.add.at(sums, idx, z)
    with np.errstate(invalid="ignore"):
        centers = sums / counts[:, None]
    dump = ScatterDump(idx, ref, z, centers, counts)
    if file is not None:
        _write_scatter_csv(dump, ctx, file)
    return dump


def _write_scatter_csv(dump: ScatterDump, ctx: DemapContext, file) -> None:
    path = Path(file)
    with open(path, "w") as fh:
        fh.write(f"# qci-scatter v1, M={ctx.M}, constellation={ctx.name}\n")
        fh.write("x_qam_u,x_qam_v,z_u,z_v\n")
        for ref, z in zip(dump.qam_ref, dump.remapped):
            fh.write(f"{ref[0]:.10g},{ref[1]:.10g},{z[0]:.10g},{z[1]:.10g}\n")
    centers_path = path.with_name(path.stem + "_centers" + path.suffix)
    with open(centers_path, "w") as fh:
        fh.write(f"# qci-scatter-centers v1, M={ctx.M}, constellation={ctx.name}\n")
        fh.write("point_index,qam_u,qam_v,center_u,center_v,count\n")
        for i in range(ctx.M):
            g = ctx.qam_grid.points[i]
            c = dump.centers[i]
            fh.write(f"{i},{g[0]:.10g},{g[1]:.10g},{c[0]:.10g},{c[1]:.10g},{int(dump.counts[i])}\n")
