"""Frequency sampling, impulse-response synthesis, and delay-power spectra.

Transfer matrices are sampled on a uniform frequency grid, shaped by a
unit-power window, and carried to the delay domain with the inverse DFT

    y(i * dtau) = df * sum_m H[m] X[m] exp(j 2 pi i m / M),   i = 0..M-1,

where df = (f_max - f_min)/(M - 1) and dtau = 1/(f_max - f_min).  Delay
bins run from 0 to (M-1)*dtau with no shift; anything later aliases and is
out of modeled range.  Ensemble and spatial averages of |y|^2 produce
delay-power spectra whose tail slope can be extracted by a least-squares
line fit in dB.

Averages reduce with pairwise summation over a contiguous axis, so results
do not depend on how runs were scheduled.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .graph import BlockSamples, EdgeClass, PropagationGraph, VertexKind, block_samples
from .scenario import ScenarioConfig, ScenarioRealization, generate_realization, relocate_receiver
from .transfer import (
    CONDITION_WARN_THRESHOLD,
    SPECTRAL_RADIUS_LIMIT,
    BounceRange,
    SingularSystem,
    SpectralRadiusExceeded,
    TransferSample,
)
from .transfer import logger as _transfer_logger

__all__ = [
    "SpectralRadiusExceededAt",
    "LengthMismatch",
    "InsufficientBins",
    "NonpositivePower",
    "FrequencyGrid",
    "WindowSpectrum",
    "ResponseSamples",
    "ImpulseResponse",
    "SpectrumKind",
    "DelayPowerSpectrum",
    "TailSlopeFit",
    "hann_window",
    "sample_transfer",
    "sample_transfer_slices",
    "impulse_response",
    "ensemble_spectrum",
    "ensemble_spectra",
    "spatial_spectrum",
    "fit_tail_slope",
    "write_response_csv",
    "write_impulse_csv",
    "write_spectrum_csv",
    "write_sidecar",
]


class SpectralRadiusExceededAt(SpectralRadiusExceeded):
    """The scatterer loop fails to contract at a specific grid sample."""

    def __init__(self, sample_index: int, value: float, frequency_hz: float):
        self.sample_index = int(sample_index)
        self.frequency_hz = float(frequency_hz)
        super().__init__(
            value,
            f"spectral radius {value:.6g} at sample {sample_index} "
            f"(f = {frequency_hz:g} Hz) exceeds {SPECTRAL_RADIUS_LIMIT}",
        )


class LengthMismatch(ValueError):
    """Sample array and window are defined on different grids."""


class InsufficientBins(ValueError):
    """Too few delay bins fall inside the requested fit window."""


class NonpositivePower(ValueError):
    """A dB-domain fit was asked for over bins with nonpositive power."""


# -- Grids and windows -----------------------------------------------------------


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of M samples spanning [f_min, f_max] inclusive."""

    f_min_hz: float
    f_max_hz: float
    n_samples: int

    def __post_init__(self) -> None:
        if not 0.0 < self.f_min_hz < self.f_max_hz:
            raise ValueError(
                f"need 0 < f_min < f_max, got ({self.f_min_hz}, {self.f_max_hz})"
            )
        if self.n_samples < 2:
            raise ValueError(f"need at least 2 samples, got {self.n_samples}")

    @property
    def delta_f(self) -> float:
        return (self.f_max_hz - self.f_min_hz) / (self.n_samples - 1)

    @property
    def delta_tau(self) -> float:
        return 1.0 / (self.f_max_hz - self.f_min_hz)

    def frequencies(self) -> np.ndarray:
        return self.f_min_hz + self.delta_f * np.arange(self.n_samples)

    def delays(self) -> np.ndarray:
        return self.delta_tau * np.arange(self.n_samples)


@dataclass(frozen=True)
class WindowSpectrum:
    """Frequency-domain pulse spectrum with unit power: sum |X|^2 df = 1."""

    samples: np.ndarray
    grid: FrequencyGrid

    def __post_init__(self) -> None:
        x = np.asarray(self.samples, dtype=complex)
        if x.shape != (self.grid.n_samples,):
            raise LengthMismatch(
                f"window has {x.shape} samples for a grid of {self.grid.n_samples}"
            )
        power = float(np.sum(np.abs(x) ** 2) * self.grid.delta_f)
        if abs(power - 1.0) > 1e-12:
            raise ValueError(f"window power is {power!r}, expected 1 within 1e-12")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)


def hann_window(grid: FrequencyGrid) -> WindowSpectrum:
    """Raised-cosine window over samples 0..M-1, normalized to unit power.

    The raised cosine vanishes at both endpoints; for M = 2, where that
    would zero the whole window, a flat window is normalized instead.
    """
    m = grid.n_samples
    shape = 0.5 * (1.0 - np.cos(2.0 * math.pi * np.arange(m) / (m - 1)))
    if not np.any(shape):
        shape = np.ones(m)
    power = float(np.sum(shape * shape) * grid.delta_f)
    return WindowSpectrum(shape / math.sqrt(power), grid)


# -- Transfer-function sampling ----------------------------------------------------


@dataclass(frozen=True)
class ResponseSamples:
    """Transfer matrices sampled on a frequency grid.

    Stored as a dense tensor indexed [sample, receiver, transmitter];
    iteration and indexing present the per-frequency view.
    """

    grid: FrequencyGrid
    bounce_range: BounceRange
    tensor: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.tensor, dtype=complex)
        if t.ndim != 3 or t.shape[0] != self.grid.n_samples:
            raise ValueError(f"tensor shape {t.shape} does not match the grid")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    def __len__(self) -> int:
        return self.grid.n_samples

    def __getitem__(self, m: int) -> TransferSample:
        freq = self.grid.f_min_hz + self.grid.delta_f * m
        return TransferSample(freq, self.tensor[m], self.bounce_range)

    def pair(self, rx_index: int = 0, tx_index: int = 0) -> np.ndarray:
        """Scalar response of one transmitter-receiver pair, shape (M,)."""
        return self.tensor[:, rx_index, tx_index]


def _verify_contraction(samples: BlockSamples) -> None:
    """Raise unless the loop block contracts at every sampled frequency.

    Cheap induced-norm bounds (max column/row sums of |loop|) certify most
    samples; eigenvalues decide only where the bound fails.  Condition
    numbers are estimated for those undecided samples and logged past
    :data:`CONDITION_WARN_THRESHOLD`.
    """
    loop = samples.loop
    if loop.shape[1] == 0:
        return
    magnitude = np.abs(loop)
    col_bound = magnitude.sum(axis=1).max(axis=1)
    row_bound = magnitude.sum(axis=2).max(axis=1)
    bound = np.minimum(col_bound, row_bound)
    suspects = np.nonzero(bound > SPECTRAL_RADIUS_LIMIT)[0]
    if suspects.size == 0:
        return
    radii = np.max(np.abs(np.linalg.eigvals(loop[suspects])), axis=1)
    bad = np.nonzero(radii > SPECTRAL_RADIUS_LIMIT)[0]
    if bad.size:
        worst = int(suspects[bad[0]])
        raise SpectralRadiusExceededAt(
            worst, float(radii[bad[0]]), float(samples.freqs[worst])
        )
    eye = np.eye(loop.shape[1])
    for m in suspects:
        cond = np.linalg.cond(eye - loop[m], 1)
        if cond > CONDITION_WARN_THRESHOLD:
            _transfer_logger.warning(
                "ill-conditioned (I - loop) solve at f=%g Hz: condition estimate %.3g",
                samples.freqs[m], cond,
            )


def _solve_feed(samples: BlockSamples) -> np.ndarray:
    """Batched solve of (I - loop) z = feed across all frequency samples."""
    n_sc = samples.loop.shape[1]
    if n_sc == 0:
        return samples.feed.copy()
    system = np.eye(n_sc) - samples.loop
    try:
        return np.linalg.solve(system, samples.feed)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"(I - loop) solve failed: {exc}") from exc


def _loop_power(samples: BlockSamples, power: int, cache: dict) -> np.ndarray:
    if power not in cache:
        cache[power] = np.linalg.matrix_power(samples.loop, power)
    return cache[power]


def _slice_tensor(
    samples: BlockSamples,
    zt: np.ndarray,
    bounce_range: BounceRange,
    cache: dict,
) -> np.ndarray:
    """Bounce-order slice of the sampled response from shared solves."""
    n_sc = samples.loop.shape[1]
    if n_sc == 0:
        if bounce_range.first == 0:
            return samples.direct.copy()
        return np.zeros_like(samples.direct)
    lead_power = max(bounce_range.first, 1) - 1
    lead = _loop_power(samples, lead_power, cache) @ zt if lead_power else zt
    if not bounce_range.unbounded:
        lead = lead - _loop_power(samples, int(bounce_range.last), cache) @ zt
    tensor = samples.collect @ lead
    if bounce_range.first == 0:
        tensor = samples.direct + tensor
    return tensor


def _sampled_slices(
    graph: PropagationGraph, grid: FrequencyGrid, bounce_ranges
) -> list[np.ndarray]:
    samples = block_samples(graph, grid.frequencies())
    _verify_contraction(samples)
    zt = _solve_feed(samples)
    cache: dict = {}
    return [_slice_tensor(samples, zt, r, cache) for r in bounce_ranges]


def sample_transfer(
    graph: PropagationGraph,
    grid: FrequencyGrid,
    bounce_range: BounceRange = BounceRange.full(),
) -> ResponseSamples:
    """Sample the (partial) transfer matrix at every grid frequency.

    The linear system behind the resolvent is factored once per frequency
    and shared by all transmitter/receiver pairs; the loop block's
    contraction is re-verified sample by sample.
    """
    (tensor,) = _sampled_slices(graph, grid, (bounce_range,))
    return ResponseSamples(grid=grid, bounce_range=bounce_range, tensor=tensor)


def sample_transfer_slices(
    graph: PropagationGraph, grid: FrequencyGrid, bounce_ranges
) -> tuple[ResponseSamples, ...]:
    """Sample several bounce-order slices while sharing the frequency solves."""
    bounce_ranges = tuple(bounce_ranges)
    tensors = _sampled_slices(graph, grid, bounce_ranges)
    return tuple(
        ResponseSamples(grid=grid, bounce_range=r, tensor=t)
        for r, t in zip(bounce_ranges, tensors)
    )


# -- Impulse responses --------------------------------------------------------------


@dataclass(frozen=True)
class ImpulseResponse:
    """Delay-domain response on the grid's delay axis (spacing dtau, no shift)."""

    samples: np.ndarray
    grid: FrequencyGrid
    bounce_range: BounceRange | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.samples, dtype=complex)
        if y.shape != (self.grid.n_samples,):
            raise LengthMismatch(
                f"{y.shape[0]} samples on a grid of {self.grid.n_samples}"
            )
        y.setflags(write=False)
        object.__setattr__(self, "samples", y)

    @property
    def delay_axis(self) -> np.ndarray:
        return self.grid.delays()

    def power(self) -> np.ndarray:
        return np.abs(self.samples) ** 2


def _idft(weighted: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    # y_i = df * sum_m v[m] exp(j 2 pi i m / M), evaluated as M * df * ifft(v).
    return grid.n_samples * grid.delta_f * np.fft.ifft(weighted)


def impulse_response(
    samples,
    window: WindowSpectrum,
    *,
    rx_index: int = 0,
    tx_index: int = 0,
    bounce_range: BounceRange | None = None,
) -> ImpulseResponse:
    """Window the sampled response of one Tx/Rx pair and inverse-transform it.

    ``samples`` is either a :class:`ResponseSamples` (a pair is selected)
    or a one-dimensional complex array on the window's grid.
    """
    if isinstance(samples, ResponseSamples):
        if samples.grid != window.grid:
            raise LengthMismatch(
                f"samples on {samples.grid}, window on {window.grid}"
            )
        values = samples.pair(rx_index, tx_index)
        bounce_range = samples.bounce_range if bounce_range is None else bounce_range
    else:
        values = np.asarray(samples, dtype=complex)
        if values.shape != (window.grid.n_samples,):
            raise LengthMismatch(
                f"{values.shape} samples against a window of {window.grid.n_samples}"
            )
    y = _idft(values * window.samples, window.grid)
    return ImpulseResponse(samples=y, grid=window.grid, bounce_range=bounce_range)


# -- Delay-power spectra --------------------------------------------------------------


class SpectrumKind(Enum):
    ENSEMBLE = "ensemble"
    SPATIAL = "spatial"


@dataclass(frozen=True)
class DelayPowerSpectrum:
    """Average of |y(i dtau)|^2 over an ensemble of runs or receiver positions."""

    power: np.ndarray
    grid: FrequencyGrid
    kind: SpectrumKind
    count: int

    def __post_init__(self) -> None:
        p = np.asarray(self.power, dtype=float)
        if p.shape != (self.grid.n_samples,):
            raise ValueError(f"power shape {p.shape} does not match the grid")
        if np.any(p < 0.0):
            raise ValueError("power bins must be nonnegative")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        p.setflags(write=False)
        object.__setattr__(self, "power", p)

    @property
    def delay_axis(self) -> np.ndarray:
        return self.grid.delays()


def _pairwise_mean(arrays) -> np.ndarray:
    # Stack with the reduction axis last and contiguous so numpy's pairwise
    # summation applies; the result is independent of scheduling order.
    stack = np.ascontiguousarray(np.stack(arrays, axis=-1))
    return np.add.reduce(stack, axis=-1) / stack.shape[-1]


def _annotate(exc: BaseException, run_index: int, seed: int) -> None:
    note = f"while simulating run {run_index} (seed {seed})"
    add_note = getattr(exc, "add_note", None)
    if add_note is not None:
        add_note(note)
    else:  # pre-3.11 interpreters: carry the context in the args tuple
        exc.args = exc.args + (note,)


def _ensemble_run_powers(args) -> list[np.ndarray]:
    config, grid, bounce_ranges, window, rx_index, tx_index = args
    realization = generate_realization(config, grid)
    tensors = _sampled_slices(realization.graph, grid, bounce_ranges)
    out = []
    for tensor in tensors:
        y = _idft(tensor[:, rx_index, tx_index] * window.samples, grid)
        out.append(np.abs(y) ** 2)
    return out


def ensemble_spectra(
    config: ScenarioConfig,
    grid: FrequencyGrid,
    n_runs: int,
    window: WindowSpectrum,
    *,
    bounce_ranges=(BounceRange.full(),),
    rx_index: int = 0,
    tx_index: int = 0,
    workers: int | None = None,
) -> tuple[DelayPowerSpectrum, ...]:
    """Monte Carlo delay-power spectra, one per requested bounce range.

    Run ``i`` simulates an independent realization seeded ``config.seed + i``;
    all requested bounce-order slices share that run's frequency solves.
    ``workers`` > 1 distributes runs over processes; the average is formed
    in run order either way, so results match the serial ones.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if window.grid != grid:
        raise LengthMismatch("window grid differs from the sampling grid")
    bounce_ranges = tuple(bounce_ranges)
    args = [
        (replace(config, seed=config.seed + i), grid, bounce_ranges, window, rx_index, tx_index)
        for i in range(n_runs)
    ]
    per_range: list[list[np.ndarray]] = [[] for _ in bounce_ranges]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_ensemble_run_powers, args, chunksize=max(1, n_runs // (4 * workers)))
            for i, arg in enumerate(args):
                try:
                    powers = next(results)
                except StopIteration:  # pragma: no cover - map yields n_runs items
                    raise
                except Exception as exc:
                    _annotate(exc, i, arg[0].seed)
                    raise
                for slot, p in zip(per_range, powers):
                    slot.append(p)
    else:
        for i, arg in enumerate(args):
            try:
                powers = _ensemble_run_powers(arg)
            except Exception as exc:
                _annotate(exc, i, arg[0].seed)
                raise
            for slot, p in zip(per_range, powers):
                slot.append(p)
    return tuple(
        DelayPowerSpectrum(
            power=_pairwise_mean(slot),
            grid=grid,
            kind=SpectrumKind.ENSEMBLE,
            count=n_runs,
        )
        for slot in per_range
    )


def ensemble_spectrum(
    config: ScenarioConfig,
    grid: FrequencyGrid,
    n_runs: int,
    window: WindowSpectrum,
    *,
    rx_index: int = 0,
    tx_index: int = 0,
    workers: int | None = None,
) -> DelayPowerSpectrum:
    """Ensemble average of |y|^2 over independent full-range realizations."""
    (spectrum,) = ensemble_spectra(
        config,
        grid,
        n_runs,
        window,
        bounce_ranges=(BounceRange.full(),),
        rx_index=rx_index,
        tx_index=tx_index,
        workers=workers,
    )
    return spectrum


def _receiver_blocks(graph: PropagationGraph, freqs: np.ndarray):
    """Direct and collect blocks only; the scatterer-side blocks are reused."""
    m = freqs.shape[0]
    direct = np.zeros((m, graph.n_rx, graph.n_tx), dtype=complex)
    collect = np.zeros((m, graph.n_rx, graph.n_scatterers), dtype=complex)
    for edge in graph.edges:
        if edge.dst.kind is not VertexKind.RX:
            continue
        values = edge.transfer_value(freqs)
        if edge.src.kind is VertexKind.TX:
            direct[:, edge.dst.index, edge.src.index] = values
        else:
            collect[:, edge.dst.index, edge.src.index] = values
    return direct, collect


def spatial_spectrum(
    realization,
    rx_positions,
    grid: FrequencyGrid,
    window: WindowSpectrum,
    *,
    rx_index: int = 0,
    tx_index: int = 0,
) -> DelayPowerSpectrum:
    """Average |y|^2 over receiver placements of a single realization.

    Each placement refreshes only the receiver-side edges (delays and gain
    laws of direct and scatterer-to-receiver edges); the scatterer-side
    blocks and the per-frequency solves are computed once and shared.  The
    invariance of the feed and loop blocks across moves is asserted.
    """
    graph = realization.graph if isinstance(realization, ScenarioRealization) else realization
    positions = [tuple(float(c) for c in p) for p in rx_positions]
    if not positions:
        raise ValueError("need at least one receiver position")
    if window.grid != grid:
        raise LengthMismatch("window grid differs from the sampling grid")
    freqs = grid.frequencies()
    base = block_samples(graph, freqs)
    _verify_contraction(base)
    zt = _solve_feed(base)
    scatter_side = tuple(
        e for e in graph.edges if e.dst.kind is not VertexKind.RX
    )
    powers = []
    for k, position in enumerate(positions):
        moved = relocate_receiver(graph, rx_index, position)
        moved_scatter_side = tuple(
            e for e in moved.edges if e.dst.kind is not VertexKind.RX
        )
        assert all(a is b for a, b in zip(scatter_side, moved_scatter_side)) and len(
            scatter_side
        ) == len(moved_scatter_side), "receiver move altered scatterer-side edges"
        if k == 0:
            check = block_samples(moved, freqs)
            assert np.array_equal(check.loop, base.loop) and np.array_equal(
                check.feed, base.feed
            ), "receiver move altered the loop or feed block"
        direct, collect = _receiver_blocks(moved, freqs)
        values = direct[:, rx_index, tx_index] + np.sum(
            collect[:, rx_index, :] * zt[:, :, tx_index], axis=1
        )
        y = _idft(values * window.samples, grid)
        powers.append(np.abs(y) ** 2)
    return DelayPowerSpectrum(
        power=_pairwise_mean(powers),
        grid=grid,
        kind=SpectrumKind.SPATIAL,
        count=len(positions),
    )


# -- Tail-slope fitting ----------------------------------------------------------------


@dataclass(frozen=True)
class TailSlopeFit:
    """Least-squares line through 10 log10(power) versus delay in ns."""

    slope_db_per_ns: float
    intercept_db: float
    residual_rms_db: float
    n_bins: int


def fit_tail_slope(
    spectrum: DelayPowerSpectrum, delay_window: tuple[float, float]
) -> TailSlopeFit:
    """Fit the dB-domain tail of a delay-power spectrum over a delay window.

    ``delay_window`` is (start, stop) in seconds; the slope is reported in
    dB per nanosecond.  All bins inside the window must hold positive
    power, and at least 10 bins are required.
    """
    start, stop = float(delay_window[0]), float(delay_window[1])
    if not start < stop:
        raise ValueError(f"empty delay window ({start}, {stop})")
    delays = spectrum.delay_axis
    mask = (delays >= start) & (delays <= stop)
    n_bins = int(np.count_nonzero(mask))
    if n_bins < 10:
        raise InsufficientBins(
            f"only {n_bins} bins inside [{start:g}, {stop:g}] s, need at least 10"
        )
    power = spectrum.power[mask]
    if np.any(power <= 0.0):
        raise NonpositivePower("tail fit needs strictly positive power in the window")
    x_ns = delays[mask] * 1e9
    y_db = 10.0 * np.log10(power)
    slope, intercept = np.polyfit(x_ns, y_db, 1)
    residual = y_db - (slope * x_ns + intercept)
    rms = float(np.sqrt(np.mean(residual ** 2)))
    return TailSlopeFit(
        slope_db_per_ns=float(slope),
        intercept_db=float(intercept),
        residual_rms_db=rms,
        n_bins=n_bins,
    )


# -- CSV / metadata emission --------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def write_response_csv(path, samples: ResponseSamples) -> None:
    """Frequency-domain CSV: freq_hz plus re/im columns per Tx/Rx pair."""
    path = Path(path)
    _, n_rx, n_tx = samples.tensor.shape
    columns = ["freq_hz"]
    for r in range(n_rx):
        for t in range(n_tx):
            columns += [f"h_rx{r}_tx{t}_re", f"h_rx{r}_tx{t}_im"]
    freqs = samples.grid.frequencies()
    lines = [",".join(columns)]
    for m in range(len(samples)):
        row = [_fmt(freqs[m])]
        for r in range(n_rx):
            for t in range(n_tx):
                value = samples.tensor[m, r, t]
                row += [_fmt(value.real), _fmt(value.imag)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def write_impulse_csv(path, impulse: ImpulseResponse) -> None:
    """Delay-domain CSV with columns delay_s, h_re, h_im."""
    path = Path(path)
    delays = impulse.delay_axis
    lines = ["delay_s,h_re,h_im"]
    for i, value in enumerate(impulse.samples):
        lines.append(f"{_fmt(delays[i])},{_fmt(value.real)},{_fmt(value.imag)}")
    path.write_text("\n".join(lines) + "\n")


def write_spectrum_csv(path, spectrum: DelayPowerSpectrum) -> None:
    """Delay-power CSV with linear and dB columns (dB is -inf on empty bins)."""
    path = Path(path)
    delays = spectrum.delay_axis
    lines = ["delay_s,power_linear,power_db"]
    for i, p in enumerate(spectrum.power):
        db = 10.0 * math.log10(p) if p > 0.0 else -math.inf
        lines.append(f"{_fmt(delays[i])},{_fmt(p)},{_fmt(db)}")
    path.write_text("\n".join(lines) + "\n")


def config_digest(config_doc: dict) -> str:
    """SHA-1 of the canonical JSON form of a config document."""
    canonical = json.dumps(config_doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(canonical.encode()).hexdigest()


def write_sidecar(
    path,
    *,
    grid: FrequencyGrid,
    window_label: str,
    seeds,
    config_doc: dict,
    extra: dict | None = None,
) -> None:
    """JSON sidecar recording grid, window, seeds, and the config digest."""
    doc = {
        "grid": {
            "f_min_hz": grid.f_min_hz,
            "f_max_hz": grid.f_max_hz,
            "n_samples": grid.n_samples,
        },
        "window": window_label,
        "seeds": list(seeds),
        "config_sha1": config_digest(config_doc),
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
