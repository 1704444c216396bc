"""Culture time-series ingestion, windowing, scaling and synthesis.

File format: long CSV with header ``culture_id, day, <param>, <param>, ...``
(one row per culture-day, days 1-based). The synthetic generator emits the
23-parameter bioreactor schema listed in PARAMETER_NAMES; the first 13
names follow common cell-culture vocabulary, the rest are invented but
plausible process parameters.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np


class DataFormatError(ValueError):
    """Raised when an input file violates the documented CSV schema."""


#: canonical 23-parameter schema of the synthetic generator
PARAMETER_NAMES = [
    "mAb", "VCD", "TCD", "ECT", "EGN", "Glutamine", "K+", "Na+",
    "Osmolality", "Temperature", "pCO2", "HCO3-", "ACV",
    "Glucose", "Lactate", "Ammonia", "pH", "DO", "pO2", "Ca2+",
    "Viability", "CellDiameter", "FeedVolume",
]


@dataclass
class CultureSeries:
    """One bioreactor's multi-day record of named process parameters.

    `days` is sorted and strictly increasing (1-based); `records[i]` maps
    parameter name -> value for day `days[i]`. All records share one
    name set.
    """

    culture_id: str
    days: list[int]
    records: list[dict[str, float]]

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def feature_names(self) -> list[str]:
        return list(self.records[0].keys()) if self.records else []

    def day_map(self) -> dict[int, dict[str, float]]:
        return dict(zip(self.days, self.records))


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def load_cultures(path, fill_forward: bool = False) -> list[CultureSeries]:
    """Parse a long-format culture CSV into one series per culture.

    Rejects duplicate (culture, day) pairs, non-numeric cells and missing
    values, naming the offending line. With `fill_forward` a missing cell
    is carried forward from the previous day of the same culture instead
    (a leading missing value is still an error).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "culture_id" or header[1] != "day":
            raise DataFormatError(
                f"{path}: header must be 'culture_id,day,<param>,...', got {header[:3]}"
            )
        params = header[2:]

        order: list[str] = []
        by_culture: dict[str, dict[int, dict[str, float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"line {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            cid = row[0].strip()
            if not cid:
                raise DataFormatError(f"line {lineno}: empty culture_id")
            try:
                day = int(row[1])
            except ValueError:
                raise DataFormatError(
                    f"line {lineno}: day {row[1]!r} is not an integer"
                ) from None
            if day < 1:
                raise DataFormatError(f"line {lineno}: day must be >= 1, got {day}")

            rec: dict[str, float] = {}
            for name, cell in zip(params, row[2:]):
                cell = cell.strip()
                if cell == "":
                    if not fill_forward:
                        raise DataFormatError(
                            f"line {lineno}, column {name!r}: missing value "
                            "(pass fill_forward=True to carry the last observation)"
                        )
                    rec[name] = math.nan
                    continue
                try:
                    val = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"line {lineno}, column {name!r}: non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(val):
                    raise DataFormatError(
                        f"line {lineno}, column {name!r}: non-finite value {cell!r}"
                    )
                rec[name] = val

            days = by_culture.setdefault(cid, {})
            if cid not in order:
                order.append(cid)
            if day in days:
                raise DataFormatError(
                    f"line {lineno}: duplicate day {day} for culture {cid!r}"
                )
            days[day] = rec

    out = []
    for cid in order:
        day_items = sorted(by_culture[cid].items())
        days = [d for d, _ in day_items]
        records = [r for _, r in day_items]
        if fill_forward:
            for name in params:
                last = math.nan
                for i, rec in enumerate(records):
                    if math.isnan(rec[name]):
                        if math.isnan(last):
                            raise DataFormatError(
                                f"culture {cid!r}, day {days[i]}, column {name!r}: "
                                "missing value with no earlier observation to carry"
                            )
                        rec[name] = last
                    else:
                        last = rec[name]
        out.append(CultureSeries(cid, days, records))
    return out


def write_cultures_csv(series: list[CultureSeries], path) -> None:
    """Write series back to the long CSV format (full float precision)."""
    if not series:
        raise ValueError("nothing to write")
    params = series[0].feature_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["culture_id", "day"] + params)
        for s in series:
            for day, rec in zip(s.days, s.records):
                writer.writerow([s.culture_id, day] + [repr(rec[p]) for p in params])


# ---------------------------------------------------------------------------
# supervised windowing
# ---------------------------------------------------------------------------

@dataclass
class SupervisedSet:
    """Windowed design matrix and target vector for one forecast horizon."""

    inputs: np.ndarray            # (N, n) float64
    targets: np.ndarray           # (N,) float64
    culture_tags: np.ndarray      # (N,) culture id per row
    feature_names: list[str]
    target_name: str
    horizon: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.culture_tags = np.asarray(self.culture_tags)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be 2-D")
        if not (len(self.targets) == len(self.culture_tags) == self.inputs.shape[0]):
            raise ValueError("inputs, targets and culture_tags must align")
        if self.inputs.shape[1] != len(self.feature_names):
            raise ValueError("feature_names must match input columns")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def cultures(self) -> list[str]:
        seen = dict.fromkeys(self.culture_tags.tolist())
        return [str(c) for c in seen]

    def subset_rows(self, index) -> "SupervisedSet":
        return replace(
            self,
            inputs=self.inputs[index],
            targets=self.targets[index],
            culture_tags=self.culture_tags[index],
            feature_names=list(self.feature_names),
        )

    def subset_cultures(self, culture_ids) -> "SupervisedSet":
        mask = np.isin(self.culture_tags, list(culture_ids))
        return self.subset_rows(mask)

    def select_features(self, names) -> "SupervisedSet":
        names = list(names)
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise ValueError(f"unknown features: {missing}")
        cols = [self.feature_names.index(n) for n in names]
        return replace(self, inputs=self.inputs[:, cols], feature_names=names)


def window(series: list[CultureSeries], feature_names, target_name: str,
           horizon: int, include_intermediate: bool = True) -> SupervisedSet:
    """Slice culture series into supervised rows for a 1- or 2-day horizon.

    Horizon 1 pairs day t inputs with the target at day t+1. Horizon 2
    targets day t+2; with `include_intermediate` the day t+1 target value
    is appended as an extra input feature (the slot the recursive
    forecaster fills with the one-day-ahead prediction at test time).
    Rows never mix days of different cultures, and days must be
    consecutive integers for a row to be emitted. Cultures too short for
    the horizon are skipped with a warning.
    """
    if horizon not in (1, 2):
        raise ValueError("horizon must be 1 or 2")
    feature_names = list(feature_names)

    out_names = list(feature_names)
    if horizon == 2 and include_intermediate:
        out_names.append(f"{target_name}(t+1)")

    rows, targets, tags = [], [], []
    for s in series:
        have = set(feature_names) | {target_name}
        missing = have - set(s.feature_names)
        if missing:
            raise ValueError(
                f"culture {s.culture_id!r} lacks parameters {sorted(missing)}"
            )
        if s.n_days < horizon + 1:
            warnings.warn(
                f"culture {s.culture_id!r} has {s.n_days} day(s), "
                f"needs {horizon + 1} for horizon {horizon}; skipped"
            )
            continue
        recs = s.day_map()
        for t in s.days:
            needed = [t + h for h in range(1, horizon + 1)]
            if any(d not in recs for d in needed):
                continue
            x = [recs[t][f] for f in feature_names]
            if horizon == 2 and include_intermediate:
                x.append(recs[t + 1][target_name])
            rows.append(x)
            targets.append(recs[t + horizon][target_name])
            tags.append(s.culture_id)

    inputs = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(out_names))
    return SupervisedSet(inputs, np.asarray(targets, dtype=np.float64),
                         np.asarray(tags), out_names, target_name, horizon)


# ---------------------------------------------------------------------------
# min-max scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalerParams:
    """Per-feature and target min/max taken from a training set."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def __post_init__(self):
        object.__setattr__(self, "feature_min",
                           np.asarray(self.feature_min, dtype=np.float64))
        object.__setattr__(self, "feature_max",
                           np.asarray(self.feature_max, dtype=np.float64))
        if np.any(self.feature_max < self.feature_min) or self.target_max < self.target_min:
            raise ValueError("max must be >= min")

    @classmethod
    def identity(cls, n_features: int) -> "ScalerParams":
        """No-op scaler for data that is already in model space."""
        return cls(np.zeros(n_features), np.ones(n_features), 0.0, 1.0)

    def transform_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.feature_max - self.feature_min
        safe = np.where(span > 0, span, 1.0)
        return (X - self.feature_min) / safe

    def transform_target(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        span = self.target_max - self.target_min
        return (y - self.target_min) / (span if span > 0 else 1.0)

    def inverse_target(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        span = self.target_max - self.target_min
        return y * (span if span > 0 else 1.0) + self.target_min


def fit_scaler(train: SupervisedSet) -> ScalerParams:
    """Min-max parameters from training rows only.

    Training extremes map to exactly 0 and 1; a degenerate (constant)
    feature scales to 0 everywhere. Out-of-range values at apply time are
    scaled without clipping.
    """
    if train.n_samples == 0:
        raise ValueError("cannot fit a scaler on an empty set")
    return ScalerParams(
        train.inputs.min(axis=0), train.inputs.max(axis=0),
        float(train.targets.min()), float(train.targets.max()),
    )


def apply_scaler(data: SupervisedSet, scaler: ScalerParams) -> SupervisedSet:
    return replace(
        data,
        inputs=scaler.transform_features(data.inputs),
        targets=scaler.transform_target(data.targets),
        feature_names=list(data.feature_names),
    )


def unscale_target(y, scaler: ScalerParams) -> np.ndarray:
    return scaler.inverse_target(y)


def write_supervised_csv(data: SupervisedSet, path) -> None:
    """Flat export: culture_id, one column per feature, then the target."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["culture_id"] + data.feature_names + ["target"])
        for i in range(data.n_samples):
            writer.writerow(
                [str(data.culture_tags[i])]
                + [repr(float(v)) for v in data.inputs[i]]
                + [repr(float(data.targets[i]))]
            )


# ---------------------------------------------------------------------------
# synthetic bioprocess generator
# ---------------------------------------------------------------------------

def synthesize(n_cultures: int, n_days: int, noise: float = 0.0,
               seed: int = 0) -> list[CultureSeries]:
    """Generate fed-batch-like culture series with the 23-parameter schema.

    Each culture follows logistic viable-cell growth that switches into a
    death phase (onset day and rates drawn per culture), saturating
    antibody accumulation driven by the viable cell density, decaying
    glutamine, rising osmolality and near-constant temperature with a
    mid-run shift. `noise` adds multiplicative observation noise on top
    of the clean state; noise=0 gives smooth deterministic curves with
    strictly increasing antibody titre.
    """
    if n_cultures < 1:
        raise ValueError("n_cultures must be >= 1")
    if n_days < 3:
        raise ValueError("n_days must be >= 3")
    if noise < 0:
        raise ValueError("noise must be >= 0")

    rng = np.random.default_rng(seed)
    series = []
    for i in range(n_cultures):
        growth = rng.uniform(0.55, 0.90)
        capacity = rng.uniform(14.0, 22.0)
        death_day = rng.uniform(8.0, 12.5)
        death_rate = rng.uniform(0.10, 0.22)
        mab_rate = rng.uniform(14.0, 24.0)
        mab_sat = rng.uniform(2800.0, 4200.0)
        gln_use = rng.uniform(0.030, 0.045)
        glc_use = rng.uniform(0.040, 0.060)
        shift_day = int(round(rng.uniform(6.0, 9.0)))
        dip_day = int(round(rng.uniform(3.0, max(4.0, n_days - 1.0))))
        do_phase = rng.uniform(0.0, 2 * math.pi)

        vcd = rng.uniform(0.35, 0.75)
        dead = vcd * rng.uniform(0.02, 0.06)
        mab = rng.uniform(30.0, 90.0)
        gln = rng.uniform(5.5, 7.5)
        glc = rng.uniform(7.0, 9.0)
        lac = rng.uniform(0.5, 1.2)
        amm = rng.uniform(0.3, 0.6)
        osm = rng.uniform(282.0, 298.0)
        egn = rng.uniform(18.0, 22.0)
        k_ion = rng.uniform(3.9, 4.6)
        na = rng.uniform(136.0, 144.0)
        ca = rng.uniform(1.0, 1.3)
        pco2 = rng.uniform(65.0, 85.0)
        feed_vol = 0.0

        days, records = [], []
        for t in range(1, n_days + 1):
            tcd = vcd + dead
            temp = 34.0 if t >= shift_day else 36.8
            if t == dip_day:
                temp -= 1.2
            acv = 1600.0 + 12.0 * t + (60.0 * (t - death_day) if t > death_day else 0.0)
            rec_clean = {
                "mAb": mab,
                "VCD": vcd,
                "TCD": tcd,
                "ECT": 24.0 * (t - 1),
                "EGN": egn,
                "Glutamine": gln,
                "K+": k_ion,
                "Na+": na,
                "Osmolality": osm,
                "Temperature": temp,
                "pCO2": pco2,
                "HCO3-": 4.2 + 0.22 * pco2,
                "ACV": acv,
                "Glucose": glc,
                "Lactate": lac,
                "Ammonia": amm,
                "pH": 7.15 - 0.015 * t - 0.002 * lac,
                "DO": 50.0 + 3.0 * math.sin(0.9 * t + do_phase),
                "pO2": 75.0 + 4.5 * math.sin(0.9 * t + do_phase),
                "Ca2+": ca,
                "Viability": 100.0 * vcd / tcd,
                "CellDiameter": (6.0 * acv / math.pi) ** (1.0 / 3.0),
                "FeedVolume": feed_vol,
            }
            eta = rng.standard_normal(len(PARAMETER_NAMES))
            if noise > 0:
                rec = {
                    name: rec_clean[name] * (1.0 + noise * e)
                    for name, e in zip(PARAMETER_NAMES, eta)
                }
            else:
                rec = {name: rec_clean[name] for name in PARAMETER_NAMES}
            days.append(t)
            records.append(rec)

            # advance the hidden state to day t+1
            growing = t < death_day and gln > 0.4
            if growing:
                dv = growth * vcd * (1.0 - vcd / capacity)
                new_dead = 0.02 * vcd
            else:
                dv = -death_rate * vcd
                new_dead = (death_rate + 0.02) * vcd
            vcd_next = max(vcd + dv, 0.05)
            if vcd_next > vcd:
                egn += math.log2(vcd_next / vcd)
            dead = dead * 0.92 + new_dead
            mab = mab + mab_rate * vcd * (1.0 - mab / mab_sat)
            gln_cons = min(gln - 0.02, gln_use * vcd + 0.03)
            gln = gln - max(gln_cons, 0.0)
            bolus = 2.5 if glc < 3.0 else 0.0
            glc_cons = min(glc - 0.2, glc_use * vcd + 0.05)
            glc = glc - max(glc_cons, 0.0) + bolus
            lac = max(lac + 0.45 * max(glc_cons, 0.0) - (0.18 * lac if glc < 3.5 else 0.0), 0.05)
            amm = amm + 0.55 * max(gln_cons, 0.0) + 0.01
            osm = osm + 1.0 + 0.9 * bolus + 0.05 * t
            k_ion = k_ion + 0.04 + 0.02 * bolus
            na = na + 0.15
            pco2 = max(pco2 - 2.3, 42.0)
            feed_vol = feed_vol + 0.02 + (0.12 if bolus else 0.0)
            vcd = vcd_next

        series.append(CultureSeries(f"C{i + 1:03d}", days, records))
    return series
