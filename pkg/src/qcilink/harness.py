"""Configuration-driven experiment runner.

Every mode decomposes its Monte Carlo work into fixed-size blocks; block b
of grid point p draws from an independent generator seeded by
(master seed, stream tag, p, b), and results merge in block order. Output
is therefore bit-identical for a given (config, seed) no matter how many
worker processes share the blocks. Early stopping in the BER modes scans
the merged block sequence, so extra blocks computed by idle workers are
discarded rather than folded in.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass, fields

import numpy as np

from .channel import spec_from_psnr
from .coding import ParityCheckCode, bundled_code, decode_bp, deinterleave, encode, info_bits_of, interleave, load_alist
from .constellation import load_constellation, power_stats
from .demapper import DEMAPPER_KINDS, custom_context, demap, estimate_affine_compensation, qam_context, qci_context
from .errors import ConfigError
from .metrics import GMI_MIN_SAMPLES, MeanAccumulator, SweepRecord, gmi_symbol_scores, scatter_dump

MODES = ("uncoded_ber", "coded_ber", "gmi", "scatter", "complexity")
FAMILIES = ("qam", "qci", "file")

GMI_BLOCK_SYMBOLS = 125_000
UNCODED_BLOCK_SYMBOLS = 25_000
CODED_BLOCK_FRAMES = 25
COMPLEXITY_SYMBOLS = 256

# stream tags keep the per-purpose generators independent
_TAG_GMI, _TAG_COMP, _TAG_UNCODED, _TAG_CODED, _TAG_SCATTER = range(5)

_DEFAULT_SAMPLES = {
    "gmi": 1_000_000,       # symbols per grid point
    "uncoded_ber": 10_000_000,  # bit budget per grid point
    "coded_ber": 10_000,    # frame budget per grid point
    "scatter": 20_000,      # symbols dumped
    "complexity": COMPLEXITY_SYMBOLS,
}
_DEFAULT_TARGET_ERRORS = {"uncoded_ber": 100, "coded_ber": 50}


@dataclass
class SimConfig:
    family: str = "qci"
    M: int = 16
    constellation_file: str | None = None
    demapper: str = "qci_lcd"
    mode: str = "gmi"
    psnr_start: float = 8.0
    psnr_stop: float = 16.0
    psnr_step: float = 0.25
    samples: int = 0          # 0 -> per-mode default
    target_errors: int = 0    # 0 -> per-mode default (BER modes only)
    comp_samples: int = 100_000
    code_file: str | None = None
    max_iters: int = 50
    seed: int = 1
    workers: int = 0          # 0 -> cpu count
    output: str = "sweep.csv"


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def parse_config(path=None, overrides: dict | None = None) -> SimConfig:
    """Build a config from an optional key=value file plus flag overrides.

    Unknown keys are hard errors; flags win over file values.
    """
    values: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        for lineno, raw in enumerate(lines, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    kwargs = {}
    for key, val in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, val)
    cfg = SimConfig(**kwargs)
    validate_config(cfg)
    return cfg


def _coerce(key: str, val):
    if val is None or not isinstance(val, str):
        return val
    ftype = _FIELD_TYPES[key]
    try:
        if "int" in str(ftype):
            return int(val)
        if "float" in str(ftype):
            return float(val)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {val!r}") from exc
    return val


def validate_config(cfg: SimConfig) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}; choose from {MODES}")
    if cfg.family not in FAMILIES:
        raise ConfigError(f"unknown constellation family {cfg.family!r}; choose from {FAMILIES}")
    if cfg.demapper not in DEMAPPER_KINDS:
        raise ConfigError(f"unknown demapper {cfg.demapper!r}; choose from {DEMAPPER_KINDS}")
    if cfg.family == "file" and not cfg.constellation_file:
        raise ConfigError("family 'file' requires constellation_file")
    if cfg.family == "file" and cfg.demapper not in ("exact2d", "maxlog2d"):
        raise ConfigError("loaded constellations support only exact2d/maxlog2d demapping")
    if cfg.family == "qam" and cfg.demapper == "qci_lcd_compensated":
        raise ConfigError("compensation is meaningful only for the qci family")
    if cfg.psnr_step <= 0.0:
        raise ConfigError("psnr_step must be positive")
    if cfg.psnr_start > cfg.psnr_stop:
        raise ConfigError("psnr_start must not exceed psnr_stop")
    if cfg.samples < 0 or cfg.target_errors < 0:
        raise ConfigError("samples and target_errors must be nonnegative")
    if cfg.mode == "gmi" and resolved_samples(cfg) < GMI_MIN_SAMPLES:
        raise ConfigError(f"gmi mode needs samples >= {GMI_MIN_SAMPLES}")
    if cfg.comp_samples < 10_000:
        raise ConfigError("comp_samples must be >= 10000")
    if cfg.max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if cfg.seed < 0 or cfg.workers < 0:
        raise ConfigError("seed and workers must be nonnegative")


def resolved_samples(cfg: SimConfig) -> int:
    return cfg.samples if cfg.samples > 0 else _DEFAULT_SAMPLES[cfg.mode]


def resolved_target_errors(cfg: SimConfig) -> int:
    if cfg.target_errors > 0:
        return cfg.target_errors
    return _DEFAULT_TARGET_ERRORS.get(cfg.mode, 0)


def psnr_grid(cfg: SimConfig) -> list:
    n = int(math.floor((cfg.psnr_stop - cfg.psnr_start) / cfg.psnr_step + 1e-9))
    return [cfg.psnr_start + i * cfg.psnr_step for i in range(n + 1)]


def derived_rng(seed: int, tag: int, point: int, block: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag, point, block])


def build_context(cfg: SimConfig):
    if cfg.family == "qam":
        return qam_context(cfg.M)
    if cfg.family == "qci":
        return qci_context(cfg.M)
    return custom_context(load_constellation(cfg.constellation_file))


def load_code(cfg: SimConfig) -> ParityCheckCode:
    if cfg.code_file:
        return load_alist(cfg.code_file)
    return bundled_code()


# ---------------------------------------------------------------------------
# block tasks (run in worker processes; state installed by _init_worker)

_WORKER: dict = {}


def _init_worker(cfg: SimConfig) -> None:
    _WORKER["cfg"] = cfg
    _WORKER["ctx"] = build_context(cfg)
    _WORKER["code"] = load_code(cfg) if cfg.mode == "coded_ber" else None


def _gmi_task(args):
    point, block, n0, num, comp = args
    cfg, ctx = _WORKER["cfg"], _WORKER["ctx"]
    rng = derived_rng(cfg.seed, _TAG_GMI, point, block)
    scores = gmi_symbol_scores(ctx, cfg.demapper, n0, num, rng, comp=comp)
    return scores.size, float(np.sum(scores)), float(np.sum(scores ** 2))


def _uncoded_task(args):
    point, block, n0, num = args
    cfg, ctx = _WORKER["cfg"], _WORKER["ctx"]
    rng = derived_rng(cfg.seed, _TAG_UNCODED, point, block)
    idx = rng.integers(0, ctx.M, size=num)
    x = ctx.constellation.points[idx]
    y = x + rng.normal(0.0, math.sqrt(n0 / 2.0), size=x.shape)
    frame = demap(cfg.demapper, y, ctx, n0)
    errors = int(np.sum(frame.hard_bits() != ctx.constellation.labels[idx]))
    return num * ctx.m, errors


def _coded_task(args):
    point, block, n0, frames = args
    cfg, ctx, code = _WORKER["cfg"], _WORKER["ctx"], _WORKER["code"]
    rng = derived_rng(cfg.seed, _TAG_CODED, point, block)
    lookup = ctx.constellation.index_by_code()
    weights = 1 << np.arange(ctx.m - 1, -1, -1, dtype=np.int64)

    info = rng.integers(0, 2, size=(frames, code.k), dtype=np.uint8)
    coded = encode(code, info)
    tx_bits = interleave(coded, cfg.seed)
    codes = tx_bits.reshape(frames, -1, ctx.m).astype(np.int64) @ weights
    idx = lookup[codes]
    x = ctx.constellation.points[idx.reshape(-1)]
    y = x + rng.normal(0.0, math.sqrt(n0 / 2.0), size=x.shape)
    frame = demap(cfg.demapper, y, ctx, n0)
    llrs = deinterleave(frame.values.reshape(frames, -1), cfg.seed)
    bits, _, _ = decode_bp(code, llrs, max_iters=cfg.max_iters)
    info_hat = info_bits_of(code, bits)
    bit_errors = int(np.sum(info_hat != info))
    frame_errors = int(np.sum(np.any(info_hat != info, axis=1)))
    return frames, frame_errors, frames * code.k, bit_errors


class _Executor:
    """Runs block tasks inline or on a process pool; results stay ordered."""

    def __init__(self, cfg: SimConfig):
        workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
        self.workers = workers
        self.pool = None
        if workers > 1:
            self.pool = multiprocessing.get_context("fork").Pool(
                workers, initializer=_init_worker, initargs=(cfg,)
            )
        else:
            _init_worker(cfg)

    def map(self, fn, tasks):
        tasks = list(tasks)
        if self.pool is None:
            return [fn(t) for t in tasks]
        return self.pool.map(fn, tasks, chunksize=1)

    def close(self):
        if self.pool is not None:
            self.pool.close()
            self.pool.join()


def _split_blocks(total: int, block: int) -> list:
    sizes = [block] * (total // block)
    if total % block:
        sizes.append(total % block)
    return sizes


def _stop_scan(results, target_errors: int, error_pos: int, errors_so_far: int):
    """Prefix of block results up to the first block meeting the error target.

    Scanning is sequential in block order, so the kept prefix (and with it
    the output) does not depend on how many blocks a wave computed.
    """
    kept = []
    errors = errors_so_far
    for res in results:
        kept.append(res)
        errors += res[error_pos]
        if target_errors and errors >= target_errors:
            return kept, errors, True
    return kept, errors, False


def run(cfg: SimConfig) -> list:
    """Execute the configured experiment; returns records and writes the CSV."""
    validate_config(cfg)
    ctx = build_context(cfg)
    stats = power_stats(ctx.constellation)
    grid = psnr_grid(cfg)
    records: list[SweepRecord] = []

    if cfg.mode == "scatter":
        n0 = spec_from_psnr(grid[0], stats).n0
        rng = derived_rng(cfg.seed, _TAG_SCATTER, 0, 0)
        scatter_dump(ctx, n0, resolved_samples(cfg), rng, file=cfg.output)
        return records

    if cfg.mode == "complexity":
        n0 = spec_from_psnr(grid[0], stats).n0
        rng = derived_rng(cfg.seed, _TAG_UNCODED, 0, 0)
        idx = rng.integers(0, ctx.M, size=COMPLEXITY_SYMBOLS)
        y = ctx.constellation.points[idx] + rng.normal(
            0.0, math.sqrt(n0 / 2.0), size=(COMPLEXITY_SYMBOLS, 2)
        )
        kinds = ["exact2d", "maxlog2d"]
        if ctx.family == "qam":
            kinds.append("qam_decomposed")
        if ctx.family in ("qam", "qci"):
            kinds += ["qci_lcd", "qci_remapped_2d"]
        for kind in kinds:
            frame = demap(kind, y, ctx, n0)
            per_symbol = frame.distance_evals / frame.num_symbols
            records.append(
                SweepRecord(grid[0], "evals_per_symbol", per_symbol, 0.0,
                            COMPLEXITY_SYMBOLS, 0, ctx.name, kind, cfg.seed)
            )
        _write_csv(records, cfg.output)
        return records

    execu = _Executor(cfg)
    try:
        if cfg.mode == "gmi":
            records = _run_gmi(cfg, ctx, stats, grid, execu)
        elif cfg.mode == "uncoded_ber":
            records = _run_uncoded(cfg, ctx, stats, grid, execu)
        else:
            records = _run_coded(cfg, ctx, stats, grid, execu)
    finally:
        execu.close()
    _write_csv(records, cfg.output)
    return records


def _run_gmi(cfg, ctx, stats, grid, execu) -> list:
    records = []
    samples = resolved_samples(cfg)
    for p, psnr in enumerate(grid):
        n0 = spec_from_psnr(psnr, stats).n0
        comp = None
        if cfg.demapper == "qci_lcd_compensated":
            comp = estimate_affine_compensation(
                ctx, n0, cfg.comp_samples, derived_rng(cfg.seed, _TAG_COMP, p, 0)
            )
        sizes = _split_blocks(samples, GMI_BLOCK_SYMBOLS)
        tasks = [(p, b, n0, num, comp) for b, num in enumerate(sizes)]
        acc = MeanAccumulator()
        for n, s1, s2 in execu.map(_gmi_task, tasks):
            acc = acc + MeanAccumulator(n, s1, s2)
        records.append(
            SweepRecord(psnr, "gmi", acc.mean, acc.stderr, acc.n, 0,
                        ctx.name, cfg.demapper, cfg.seed)
        )
    return records


def _run_counted(grid, stats, execu, task_fn, block_unit, budget, target, make_records):
    """Shared wave-scheduled loop for the two BER modes."""
    records = []
    wave = max(1, execu.workers)
    for p, psnr in enumerate(grid):
        n0 = spec_from_psnr(psnr, stats).n0
        sizes = _split_blocks(budget, block_unit)
        kept = []
        errors = 0
        hit = False
        b = 0
        while b < len(sizes) and not hit:
            chunk = sizes[b:b + wave]
            tasks = [(p, b + i, n0, num) for i, num in enumerate(chunk)]
            results = execu.map(task_fn, tasks)
            scanned, errors, hit = _stop_scan(results, target, 1, errors)
            kept.extend(scanned)
            b += len(chunk)
        records.extend(make_records(psnr, kept))
    return records


def _run_uncoded(cfg, ctx, stats, grid, execu) -> list:
    budget_bits = resolved_samples(cfg)
    budget_syms = max(1, math.ceil(budget_bits / ctx.m))
    target = resolved_target_errors(cfg)

    def make(psnr, kept):
        bits = sum(r[0] for r in kept)
        errors = sum(r[1] for r in kept)
        p = errors / bits
        se = math.sqrt(max(p * (1 - p), 0.0) / bits)
        return [SweepRecord(psnr, "ber", p, se, bits, errors, ctx.name, cfg.demapper, cfg.seed)]

    return _run_counted(grid, stats, execu, _uncoded_task,
                        UNCODED_BLOCK_SYMBOLS, budget_syms, target, make)


def _run_coded(cfg, ctx, stats, grid, execu) -> list:
    code = load_code(cfg)
    if code.n % ctx.m:
        raise ConfigError(
            f"code length {code.n} is not a multiple of {ctx.m} bits/symbol"
        )
    budget_frames = resolved_samples(cfg)
    target = resolved_target_errors(cfg)

    def make(psnr, kept):
        frames = sum(r[0] for r in kept)
        frame_errors = sum(r[1] for r in kept)
        bits = sum(r[2] for r in kept)
        bit_errors = sum(r[3] for r in kept)
        ber = bit_errors / bits
        fer = frame_errors / frames
        return [
            SweepRecord(psnr, "ber", ber,
                        math.sqrt(max(ber * (1 - ber), 0.0) / bits),
                        bits, bit_errors, ctx.name, cfg.demapper, cfg.seed),
            SweepRecord(psnr, "fer", fer,
                        math.sqrt(max(fer * (1 - fer), 0.0) / frames),
                        frames, frame_errors, ctx.name, cfg.demapper, cfg.seed),
        ]

    return _run_counted(grid, stats, execu, _coded_task,
                        CODED_BLOCK_FRAMES, budget_frames, target, make)


def _write_csv(records, path) -> None:
    lines = ["psnr_db,metric,value,stderr,trials,constellation,demapper,seed"]
    for r in records:
        lines.append(
            f"{r.psnr_db:.10g},{r.metric},{r.value:.10g},{r.stderr:.10g},"
            f"{r.trials},{r.constellation},{r.demapper},{r.seed}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_records_csv(records, path) -> None:
    _write_csv(records, path)
