"""Rescale-based forecast evaluation, robustness perturbations, benchmark sweeps.

The protocol guards against memorized test data: the test series is
interpolated to several time resolutions (the rescale set), the forecaster
is scored on sliding windows at every resolution, and the reported metrics
are the unweighted means over the set.  Perturbation scenarios (additive
noise, an injected harmonic, missing data) run the same sweep on a
perturbed copy of the series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, EvaluationError, InputError
from .forecasters import ForecasterHandle, forecast, make_mask
from .imagespace import SoftImageTensor, SpaceParams, denormalize, encode, normalize, soft_decode
from .rng import RngStream
from .series import TimeSeries, carry_forward, linear_resample


@dataclass(frozen=True)
class EvalConfig:
    """Windowing and rescaling parameters of one evaluation sweep."""

    lookback: int = 512
    horizons: tuple[int, ...] = (96, 192, 336, 720)
    rescale_factors: tuple[float, ...] = (0.5, 0.66, 1.0, 1.5, 2.0)
    stride: int | None = None  # None: stride equals the horizon (non-overlapping)

    def __post_init__(self) -> None:
        if self.lookback < 1:
            raise ConfigurationError(f"lookback must be positive, got {self.lookback}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigurationError(f"horizons must be positive, got {self.horizons}")
        if not self.rescale_factors or any(b <= 0 for b in self.rescale_factors):
            raise ConfigurationError(f"rescale factors must be positive, got {self.rescale_factors}")
        if self.stride is not None and self.stride < 1:
            raise ConfigurationError(f"stride must be positive, got {self.stride}")


@dataclass(frozen=True)
class PerturbationSpec:
    """One robustness scenario.

    ``gaussian_noise`` adds N(0, noise_std^2) per point; ``harmonic`` adds a
    sinusoid (amplitude defaults to 0.3x the channel's std, frequency to
    twice the channel's dominant frequency, random phase); ``missing`` marks
    each point missing independently with ``missing_probability``.
    """

    kind: str
    noise_std: float = 0.1
    harmonic_amplitude: float | None = None
    harmonic_frequency: float | None = None
    missing_probability: float = 0.3

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian_noise", "harmonic", "missing"):
            raise ConfigurationError(f"unknown perturbation kind {self.kind!r}")
        if self.noise_std < 0:
            raise ConfigurationError(f"noise std must be nonnegative, got {self.noise_std}")
        if not 0.0 <= self.missing_probability <= 1.0:
            raise ConfigurationError(f"missing probability must be in [0, 1], got {self.missing_probability}")
        if self.harmonic_amplitude is not None and self.harmonic_amplitude < 0:
            raise ConfigurationError(f"harmonic amplitude must be nonnegative, got {self.harmonic_amplitude}")
        if self.harmonic_frequency is not None and self.harmonic_frequency <= 0:
            raise ConfigurationError(f"harmonic frequency must be positive, got {self.harmonic_frequency}")

    def label(self) -> str:
        if self.kind == "gaussian_noise":
            return f"gaussian_noise:{self.noise_std:g}"
        if self.kind == "missing":
            return f"missing:{self.missing_probability:g}"
        return "harmonic"


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    horizon: int
    beta: float | None  # None marks an aggregate row (mean over the rescale set)
    scenario: str
    mse: float | None
    mae: float | None
    windows: int


@dataclass
class EvalReport:
    """Per-(horizon, beta, scenario) metrics plus aggregate accessors."""

    rows: list[ReportRow]

    def _select(self, horizon: int, scenario: str) -> list[ReportRow]:
        return [
            r
            for r in self.rows
            if r.horizon == horizon and r.scenario == scenario and r.beta is not None and r.mse is not None
        ]

    def remse(self, horizon: int, scenario: str = "none") -> float:
        rows = self._select(horizon, scenario)
        if not rows:
            raise EvaluationError(f"no usable rows for horizon={horizon}, scenario={scenario!r}")
        return float(np.mean([r.mse for r in rows]))

    def remae(self, horizon: int, scenario: str = "none") -> float:
        rows = self._select(horizon, scenario)
        if not rows:
            raise EvaluationError(f"no usable rows for horizon={horizon}, scenario={scenario!r}")
        return float(np.mean([r.mae for r in rows]))

    def aggregates(self) -> list[ReportRow]:
        """One row per (dataset, horizon, scenario): means over the rescale set."""
        keys: list[tuple[str, int, str]] = []
        for r in self.rows:
            key = (r.dataset, r.horizon, r.scenario)
            if key not in keys:
                keys.append(key)
        out = []
        for dataset, horizon, scenario in keys:
            rows = [
                r
                for r in self.rows
                if (r.dataset, r.horizon, r.scenario) == (dataset, horizon, scenario)
                and r.beta is not None
                and r.mse is not None
            ]
            if not rows:
                out.append(ReportRow(dataset, horizon, None, scenario, None, None, 0))
                continue
            out.append(
                ReportRow(
                    dataset,
                    horizon,
                    None,
                    scenario,
                    float(np.mean([r.mse for r in rows])),
                    float(np.mean([r.mae for r in rows])),
                    sum(r.windows for r in rows),
                )
            )
        return out


def tsi_rescale(series: TimeSeries, beta: float) -> TimeSeries:
    """Linearly interpolate a series to round(beta * length) samples.

    Endpoints are preserved and degree-1 signals reproduce exactly; the
    length rounding is half-to-even.  A factor of 1 returns an identical
    copy.  Missing masks are carried by nearest-position lookup.
    """
    if beta <= 0 or not math.isfinite(beta):
        raise InputError(f"rescale factor must be positive and finite, got {beta}")
    if series.length < 2:
        raise InputError("need at least 2 samples to rescale")
    new_length = round(beta * series.length)
    if new_length < 2:
        raise InputError(f"rescaled length {new_length} is too short")
    values = linear_resample(series.values, new_length)
    missing = None
    if series.missing is not None:
        positions = np.linspace(0.0, series.length - 1.0, new_length)
        missing = series.missing[:, np.rint(positions).astype(int)]
    return TimeSeries(values, missing, dict(series.tags))


def _dominant_frequency(x: np.ndarray) -> float:
    spectrum = np.abs(np.fft.rfft(x - x.mean()))
    if spectrum.size < 2 or not spectrum[1:].any():
        return 0.125
    return (int(np.argmax(spectrum[1:])) + 1) / x.size


def perturb(series: TimeSeries, spec: PerturbationSpec, rng: RngStream | np.random.Generator) -> TimeSeries:
    """Apply one perturbation scenario; missing data only grows the mask."""
    g = rng.generator() if isinstance(rng, RngStream) else rng
    values = series.values.copy()
    missing = None if series.missing is None else series.missing.copy()

    if spec.kind == "gaussian_noise":
        if spec.noise_std > 0:
            values = values + spec.noise_std * g.standard_normal(values.shape)
    elif spec.kind == "harmonic":
        t = np.arange(series.length, dtype=np.float64)
        for i in range(series.channels):
            amp = spec.harmonic_amplitude
            if amp is None:
                amp = 0.3 * float(np.std(values[i]))
            freq = spec.harmonic_frequency
            if freq is None:
                freq = 2.0 * _dominant_frequency(values[i])
            phase = g.uniform(0.0, 2.0 * math.pi)
            values[i] = values[i] + amp * np.sin(2.0 * math.pi * freq * t + phase)
    else:  # missing
        drawn = g.uniform(size=values.shape) < spec.missing_probability
        missing = drawn if missing is None else (missing | drawn)

    return TimeSeries(values, missing, dict(series.tags))


def _window_predictions(
    model: ForecasterHandle,
    look_values: np.ndarray,
    look_missing: np.ndarray | None,
    horizon: int,
    target_values: np.ndarray,
    space: SpaceParams,
) -> np.ndarray:
    """Channel-independent predictions, through the grid codec for image models."""
    channels, lookback = look_values.shape
    if model.needs_future:
        return target_values.copy()
    if model.space == "numeric":
        filled = carry_forward(look_values, look_missing)
        return np.stack([model.predict(filled[i], horizon) for i in range(channels)])

    window = TimeSeries(look_values, look_missing)
    z, stats = normalize(window, lookback)
    padded_values = np.concatenate([z.values, np.zeros((channels, horizon))], axis=1)
    padded_missing = np.concatenate(
        [
            z.missing if z.missing is not None else np.zeros((channels, lookback), dtype=bool),
            np.ones((channels, horizon), dtype=bool),
        ],
        axis=1,
    )
    image = encode(TimeSeries(padded_values, padded_missing), space)
    mask = make_mask(lookback + horizon, lookback)
    completed = forecast(model, image, mask)
    # decode only the predicted suffix: visible columns of a masked lookback
    # may be all-zero (missing) and are not probability columns
    suffix = SoftImageTensor(completed.grid[:, :, lookback:], space)
    z_pred = soft_decode(suffix).values
    return denormalize(TimeSeries(z_pred), stats).values


def remetrics(
    truth: TimeSeries,
    model: ForecasterHandle,
    cfg: EvalConfig,
    *,
    dataset: str = "series",
    scenario: str = "none",
    perturbation: PerturbationSpec | None = None,
    rng: RngStream | None = None,
    space: SpaceParams | None = None,
) -> EvalReport:
    """Score a forecaster over the full rescale set.

    For each factor the truth is rescaled (then perturbed, for robustness
    scenarios), non-overlapping windows invoke the model on the lookback,
    and squared/absolute errors against the window's future accumulate.
    Multichannel series are handled channel-independently.  Rescale factors
    leaving no room for a single window are recorded with zero windows; if
    no factor yields a window for any horizon, the run is an error.
    """
    if perturbation is not None and rng is None:
        raise ConfigurationError("a random stream is required for perturbation scenarios")
    space = space or SpaceParams()
    rows: list[ReportRow] = []

    for b_idx, beta in enumerate(cfg.rescale_factors):
        try:
            rescaled = tsi_rescale(truth, beta)
        except InputError:
            rescaled = None
        if rescaled is not None and perturbation is not None:
            rescaled = perturb(rescaled, perturbation, rng.child(b_idx))

        for horizon in cfg.horizons:
            stride = cfg.stride if cfg.stride is not None else horizon
            if rescaled is None or rescaled.length < cfg.lookback + horizon:
                rows.append(ReportRow(dataset, horizon, beta, scenario, None, None, 0))
                continue

            sq_sum = 0.0
            abs_sum = 0.0
            count = 0
            n_windows = 0
            last_start = rescaled.length - cfg.lookback - horizon
            for start in range(0, last_start + 1, stride):
                split = start + cfg.lookback
                look_values = rescaled.values[:, start:split]
                look_missing = None if rescaled.missing is None else rescaled.missing[:, start:split]
                target_values = rescaled.values[:, split : split + horizon]
                target_missing = None if rescaled.missing is None else rescaled.missing[:, split : split + horizon]

                preds = _window_predictions(model, look_values, look_missing, horizon, target_values, space)
                diff = preds - target_values
                if target_missing is not None:
                    keep = ~target_missing
                    diff = diff[keep]
                sq_sum += float(np.sum(diff * diff))
                abs_sum += float(np.sum(np.abs(diff)))
                count += diff.size
                n_windows += 1

            if count == 0:
                rows.append(ReportRow(dataset, horizon, beta, scenario, None, None, n_windows))
            else:
                rows.append(
                    ReportRow(dataset, horizon, beta, scenario, sq_sum / count, abs_sum / count, n_windows)
                )

    if not any(r.mse is not None for r in rows):
        raise EvaluationError(
            f"series too short for every (rescale factor, horizon) pair: length {truth.length}, "
            f"lookback {cfg.lookback}, horizons {cfg.horizons}"
        )
    return EvalReport(rows)


def evaluate_series(
    truth: TimeSeries,
    model: ForecasterHandle,
    cfg: EvalConfig,
    perturbations: Sequence[PerturbationSpec] = (),
    *,
    seed: int = 0,
    dataset: str = "series",
    space: SpaceParams | None = None,
    verbose: bool = False,
) -> EvalReport:
    """Sweep horizons x rescale factors x scenarios; deterministic per seed."""
    rng = RngStream(seed)
    scenarios: list[tuple[str, PerturbationSpec | None]] = [("none", None)]
    scenarios += [(spec.label(), spec) for spec in perturbations]

    rows: list[ReportRow] = []
    for s_idx, (name, spec) in enumerate(scenarios):
        report = remetrics(
            truth,
            model,
            cfg,
            dataset=dataset,
            scenario=name,
            perturbation=spec,
            rng=rng.child(s_idx),
            space=space,
        )
        rows.extend(report.rows)

    combined = EvalReport(rows)
    if verbose:
        for agg in combined.aggregates():
            if agg.mse is None:
                print(f"{agg.dataset} horizon={agg.horizon} scenario={agg.scenario}: skipped (series too short)")
            else:
                print(
                    f"{agg.dataset} horizon={agg.horizon} scenario={agg.scenario}: "
                    f"ReMSE={agg.mse:.6f} ReMAE={agg.mae:.6f} windows={agg.windows}"
                )
    return combined


def run_benchmark(
    dataset_path,
    model_id: str,
    cfg: EvalConfig,
    perturbations: Sequence[PerturbationSpec] = (),
    *,
    seed: int = 0,
    space: SpaceParams | None = None,
    report_path=None,
    verbose: bool = True,
) -> EvalReport:
    """Load a dataset CSV, resolve the model by id, and run the full sweep.

    Writes the report CSV (per-factor rows plus an aggregate block) when
    ``report_path`` is given.  Unknown model ids and malformed dataset
    files raise before any work happens.
    """
    from pathlib import Path

    from .forecasters import get_model
    from .io import read_series_csv, write_report_csv

    model = get_model(model_id)
    truth = read_series_csv(dataset_path)
    report = evaluate_series(
        truth,
        model,
        cfg,
        perturbations,
        seed=seed,
        dataset=Path(dataset_path).stem,
        space=space,
        verbose=verbose,
    )
    if report_path is not None:
        write_report_csv(report_path, report.rows, report.aggregates())
    return report
