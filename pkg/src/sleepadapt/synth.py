"""Synthetic wearable recordings with known sleep/wake truth.

Emissions are drawn at the raw-sample level so that the epoch
summarisation path is exercised end to end. Each epoch first draws a
level around its state mean (plus accumulated drift) and a within-epoch
spread; raw samples are Gaussian around that level. Abnormal segments
replace the emissions of selected signals:

* NW (not worn): ambient temperature, almost no movement;
* LOC (loss of contact): low skin temperature, movement as usual;
* ACTIVE: high heart rate and vigorous movement.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .adaptive import separability_index, si_euclidean
from .errors import ConfigError
from .ingest import SIGNALS, Manifest, RawStream, SubjectEntry, write_signal_csv
from .lda import fit_lda

DAY = 86400.0
HOUR = 3600.0
STATES = ("wake", "sleep")
ABNORMAL_KINDS = ("NW", "LOC", "ACTIVE")


@dataclass(frozen=True)
class Emission:
    mean: float
    epoch_sd: float  # between-epoch spread of the level
    sample_sd: float  # within-epoch spread of raw samples
    sd_spread: float = 0.25  # log-normal spread of sample_sd across epochs


def default_emissions() -> dict[str, dict[str, Emission]]:
    return {
        "sleep": {
            "HR": Emission(58.0, 2.5, 2.0),
            "TEMP": Emission(35.2, 0.25, 0.05, 0.2),
            "ACC": Emission(1.0, 0.002, 0.006, 0.35),
            "EDA": Emission(0.5, 0.12, 0.02, 0.3),
        },
        "wake": {
            "HR": Emission(76.0, 4.0, 5.0),
            "TEMP": Emission(33.9, 0.35, 0.08, 0.2),
            "ACC": Emission(1.0, 0.01, 0.08, 0.35),
            "EDA": Emission(0.35, 0.1, 0.03, 0.3),
        },
    }


# Replacement emissions for abnormal segments; signals not listed keep the
# underlying state's emission.
ABNORMAL_EMISSIONS = {
    "NW": {"TEMP": Emission(22.5, 0.6, 0.05, 0.2), "ACC": Emission(1.0, 0.0005, 0.0008, 0.2)},
    "LOC": {"TEMP": Emission(27.5, 0.8, 0.1, 0.2)},
    "ACTIVE": {"HR": Emission(132.0, 8.0, 6.0), "ACC": Emission(1.1, 0.05, 0.5, 0.25)},
}


@dataclass(frozen=True)
class AbnormalSegment:
    start: float
    end: float
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ABNORMAL_KINDS:
            raise ConfigError(f"unknown abnormal kind {self.kind!r}")
        if not self.end > self.start:
            raise ConfigError("abnormal segment must have end > start")


@dataclass
class SimConfig:
    days: int = 4
    seed: int = 0
    subject_id: str = "SIM"
    epoch_length: float = 60.0
    sampling_hz: dict[str, float] = field(default_factory=lambda: dict.fromkeys(SIGNALS, 1.0))
    sleep_onset_hour: float = 23.0
    sleep_hours: float = 8.0
    jitter_hours: float = 0.5
    sleep_hours_by_day: dict[int, float] = field(default_factory=dict)
    emissions: dict[str, dict[str, Emission]] = field(default_factory=default_emissions)
    # per-day additive drift of (mean, sample_sd) per state and signal
    drift: dict[str, dict[str, tuple[float, float]]] = field(default_factory=dict)
    drift_start_day: float = 0.0
    abnormal: list[AbnormalSegment] = field(default_factory=list)
    dropouts: list[tuple[float, float]] = field(default_factory=list)

    def validate(self) -> None:
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        for state in STATES:
            for sig, e in self.emissions[state].items():
                if not (e.epoch_sd >= 0 and e.sample_sd > 0):
                    raise ConfigError(f"{state}/{sig}: SDs must be positive")
        segs = sorted(self.abnormal, key=lambda s: s.start)
        for a, b in zip(segs, segs[1:]):
            if b.start < a.end:
                raise ConfigError(f"overlapping abnormal segments: {a} and {b}")

    @property
    def n_epochs(self) -> int:
        return int(round(self.days * DAY / self.epoch_length))

    def to_json(self) -> str:
        doc = asdict(self)
        doc["sleep_hours_by_day"] = {str(k): v for k, v in self.sleep_hours_by_day.items()}
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        doc = json.loads(text)
        doc["emissions"] = {s: {k: Emission(**v) for k, v in d.items()} for s, d in doc["emissions"].items()}
        doc["drift"] = {s: {k: tuple(v) for k, v in d.items()} for s, d in doc.get("drift", {}).items()}
        doc["abnormal"] = [AbnormalSegment(**a) for a in doc.get("abnormal", [])]
        doc["dropouts"] = [tuple(d) for d in doc.get("dropouts", [])]
        doc["sleep_hours_by_day"] = {int(k): v for k, v in doc.get("sleep_hours_by_day", {}).items()}
        return cls(**doc)


@dataclass
class SimSubject:
    config: SimConfig
    streams: dict[str, RawStream]
    acc_xyz: np.ndarray
    epoch_starts: np.ndarray
    truth: np.ndarray  # 1 sleep, 0 wake
    abnormal: np.ndarray  # "" or abnormal kind, per epoch

    @property
    def abnormal_mask(self) -> np.ndarray:
        return self.abnormal != ""


def sleep_truth(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    L = cfg.epoch_length
    t = np.arange(cfg.n_epochs) * L
    truth = np.zeros(cfg.n_epochs, dtype=np.int8)
    for d in range(-1, cfg.days):
        onset = d * DAY + (cfg.sleep_onset_hour + rng.normal(0, cfg.jitter_hours)) * HOUR
        hours = cfg.sleep_hours_by_day.get(d, cfg.sleep_hours) + rng.normal(0, cfg.jitter_hours / 2)
        onset = np.round(onset / L) * L
        end = onset + np.round(hours * HOUR / L) * L
        truth[(t >= onset) & (t < end)] = 1
    return truth


def _drift_offsets(cfg: SimConfig, t_epoch: np.ndarray, state: str, sig: str):
    rate = cfg.drift.get(state, {}).get(sig, (0.0, 0.0))
    elapsed = np.maximum(0.0, t_epoch / DAY - cfg.drift_start_day)
    return rate[0] * elapsed, rate[1] * elapsed


def generate_subject(cfg: SimConfig) -> SimSubject:
    """Raw streams plus per-epoch ground truth; deterministic per ``cfg.seed``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    L = cfg.epoch_length
    n_ep = cfg.n_epochs
    t_epoch = np.arange(n_ep) * L
    truth = sleep_truth(cfg, rng)

    abn = np.full(n_ep, "", dtype=object)
    for seg in cfg.abnormal:
        abn[(t_epoch >= seg.start) & (t_epoch < seg.end)] = seg.kind

    streams: dict[str, RawStream] = {}
    acc_xyz = np.empty((0, 3))
    for sig in SIGNALS:
        hz = cfg.sampling_hz.get(sig)
        if not hz:
            continue
        level = np.empty(n_ep)
        spread = np.empty(n_ep)
        z_level = rng.standard_normal(n_ep)
        z_sd = rng.standard_normal(n_ep)
        for s_idx, state in enumerate(STATES):
            m = truth == s_idx
            e = cfg.emissions[state][sig]
            dm, dsd = _drift_offsets(cfg, t_epoch[m], state, sig)
            level[m] = e.mean + dm + e.epoch_sd * z_level[m]
            spread[m] = np.maximum(e.sample_sd + dsd, 1e-4) * np.exp(e.sd_spread * z_sd[m])
        for kind, over in ABNORMAL_EMISSIONS.items():
            if sig in over:
                m = abn == kind
                e = over[sig]
                level[m] = e.mean + e.epoch_sd * z_level[m]
                spread[m] = e.sample_sd * np.exp(e.sd_spread * z_sd[m])

        n_samp = int(round(cfg.days * DAY * hz))
        ts = np.arange(n_samp) / hz
        ep = np.minimum((ts // L).astype(np.int64), n_ep - 1)
        vals = level[ep] + spread[ep] * rng.standard_normal(n_samp)
        if sig == "EDA":
            vals = np.maximum(vals, 0.0)
        keep = np.ones(n_samp, dtype=bool)
        for a, b in cfg.dropouts:
            keep &= ~((ts >= a) & (ts < b))
        ts, vals, ep = ts[keep], vals[keep], ep[keep]
        if sig == "ACC":
            u = rng.standard_normal((n_ep, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            acc_xyz = np.abs(vals)[:, None] * u[ep]
            streams[sig] = RawStream.from_xyz(ts, acc_xyz, hz)
        else:
            streams[sig] = RawStream(sig, ts, vals, hz)
    return SimSubject(cfg, streams, acc_xyz, t_epoch, truth, abn)


def write_subject(sub: SimSubject, out_dir) -> SubjectEntry:
    """Write one CSV per signal (ACC as x,y,z) and return its manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sid = sub.config.subject_id
    sigs = {}
    for name, stream in sub.streams.items():
        path = out_dir / f"{sid}_{name}.csv"
        write_signal_csv(path, stream, sub.acc_xyz if name == "ACC" else None)
        sigs[name] = (path, stream.sampling_hz)
    truth_path = out_dir / f"{sid}_truth.csv"
    with open(truth_path, "w") as fh:
        fh.write("epoch_start,sleep,abnormal\n")
        for t, y, a in zip(sub.epoch_starts, sub.truth, sub.abnormal):
            fh.write(f"{t!r},{int(y)},{a}\n")
    return SubjectEntry(sid, 0.0, sigs)


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------


def _epoch_samples(cfg: SimConfig, sig: str) -> float:
    return cfg.sampling_hz.get(sig, 1.0) * cfg.epoch_length


def med_feature_sd(cfg: SimConfig, state: str, sig: str) -> float:
    """Approximate SD of the epoch MED statistic for one state."""
    e = cfg.emissions[state][sig]
    return float(np.sqrt(e.epoch_sd**2 + (np.pi / 2) * e.sample_sd**2 / _epoch_samples(cfg, sig)))


def pooled_med_sd(cfg: SimConfig, sig: str, sleep_fraction: float | None = None) -> float:
    if sleep_fraction is None:
        sleep_fraction = cfg.sleep_hours / 24.0
    v = sleep_fraction * med_feature_sd(cfg, "sleep", sig) ** 2
    v += (1 - sleep_fraction) * med_feature_sd(cfg, "wake", sig) ** 2
    return float(np.sqrt(v))


DRIFT_FEATURES = ("HR_MED", "TEMP_MED")


def drift_scenario(
    seed: int,
    shift_sd: float = 4.0,
    drift_days: int = 7,
    init_days: int = 1,
    separation_sd: float = 4.6,
) -> SimConfig:
    """Recording whose class means translate by ``shift_sd`` pooled SDs.

    Sleep and wake differ by ``separation_sd`` pooled SDs on each of the
    ``DRIFT_FEATURES``. The first ``init_days`` are unperturbed; over the
    next ``drift_days`` both classes move linearly along the direction that
    carries wake toward sleep (heart rate down, skin temperature up).
    ``shift_sd=0`` gives the stationary twin.
    """
    em = default_emissions()
    em["sleep"]["HR"] = Emission(60.0, 3.0, 2.0)
    em["wake"]["HR"] = Emission(60.0, 3.5, 4.0)
    em["sleep"]["TEMP"] = Emission(35.0, 0.3, 0.05, 0.2)
    em["wake"]["TEMP"] = Emission(35.0, 0.3, 0.08, 0.2)
    cfg = SimConfig(days=init_days + drift_days, seed=seed, subject_id=f"DRIFT{seed:03d}", emissions=em)
    sd_hr, sd_temp = pooled_med_sd(cfg, "HR"), pooled_med_sd(cfg, "TEMP")
    em["wake"]["HR"] = replace(em["wake"]["HR"], mean=60.0 + separation_sd * sd_hr)
    em["wake"]["TEMP"] = replace(em["wake"]["TEMP"], mean=35.0 - separation_sd * sd_temp)
    cfg.drift_start_day = float(init_days)
    rate_hr = -shift_sd * sd_hr / drift_days
    rate_temp = shift_sd * sd_temp / drift_days
    cfg.drift = {s: {"HR": (rate_hr, 0.0), "TEMP": (rate_temp, 0.0)} for s in STATES}
    return cfg


def abnormal_scenario(seed: int, fraction: float = 0.15, days: int = 4) -> SimConfig:
    """Recording with NW / LOC / ACTIVE segments covering ``fraction`` of epochs.

    Segments are 30-120 min long, placed in daytime wake hours of days
    after the first (so the HMM window stays mostly clean), and the three
    kinds rotate.
    """
    rng = np.random.default_rng([seed, 7])
    cfg = SimConfig(days=days, seed=seed, subject_id=f"ABN{seed:03d}")
    L = cfg.epoch_length
    target = fraction * cfg.n_epochs * L
    segs: list[AbnormalSegment] = []
    covered = 0.0
    day_slots = [(d * DAY + 9 * HOUR, d * DAY + 21 * HOUR) for d in range(days)]
    k = 0
    attempts = 0
    while covered < target and attempts < 10000:
        attempts += 1
        lo, hi = day_slots[rng.integers(len(day_slots))]
        dur = min(float(np.round(rng.uniform(30, 120))) * 60.0, target - covered)
        dur = max(L, np.round(dur / L) * L)
        start = np.round(rng.uniform(lo, hi - dur) / L) * L
        seg = AbnormalSegment(float(start), float(start + dur), ABNORMAL_KINDS[k % 3])
        if any(seg.start < s.end + 10 * L and s.start < seg.end + 10 * L for s in segs):
            continue
        segs.append(seg)
        covered += dur
        k += 1
    cfg.abnormal = sorted(segs, key=lambda s: s.start)
    return cfg


def cohort(
    n_subjects: int,
    seed: int = 0,
    days: int = 4,
    abnormal_fraction: float = 0.08,
    shedders: Sequence[int] = (),
    effect_day: int = 0,
    sleep_loss_hours: float = 2.0,
) -> list[SimConfig]:
    """Configs for a small cohort; ``shedders`` lose sleep on ``effect_day``."""
    out = []
    for i in range(n_subjects):
        cfg = abnormal_scenario(seed * 1000 + i, abnormal_fraction, days) if abnormal_fraction > 0 else SimConfig(
            days=days, seed=seed * 1000 + i
        )
        cfg.subject_id = f"S{i + 1:02d}"
        if i in set(shedders):
            cfg.sleep_hours_by_day = {effect_day: cfg.sleep_hours - sleep_loss_hours}
        out.append(cfg)
    return out


def write_cohort(configs: Sequence[SimConfig], out_dir) -> Path:
    """Generate, write CSVs and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = [write_subject(generate_subject(c), out_dir) for c in configs]
    man = Manifest(entries, configs[0].epoch_length if configs else 60.0)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(man.to_json(out_dir), indent=2, sort_keys=True) + "\n")
    for c in configs:
        (out_dir / f"{c.subject_id}_config.json").write_text(c.to_json() + "\n")
    return path


# --------------------------------------------------------------------------
# separability demo
# --------------------------------------------------------------------------


def fig3_sample(mu: float, n_per_class: int, seed: int):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0.0, 1.0, (n_per_class, 2)), rng.normal(mu, 1.0, (n_per_class, 2))])
    y = np.r_[np.zeros(n_per_class, dtype=np.int64), np.ones(n_per_class, dtype=np.int64)]
    return X, y


def fig3_experiment(mu: float, n_per_class: int = 100, seeds: Sequence[int] = range(100)) -> tuple[float, float]:
    """Mean SI under projection distance and under Euclidean distance.

    Class 0 ~ BVN((0,0), I), class 1 ~ BVN((mu,mu), I); the projection uses
    the Fisher direction fitted on the same sample.
    """
    s1, s2 = [], []
    for seed in seeds:
        X, y = fig3_sample(mu, n_per_class, seed)
        w = fit_lda(X, y).w
        s1.append(separability_index(X, y, w))
        s2.append(si_euclidean(X, y))
    return float(np.mean(s1)), float(np.mean(s2))
