"""Synthetic households with known ground truth.

Each appliance draws usage sessions from time-of-day windows; inside a
session it draws ``power`` (plus Gaussian noise), optionally cycling on and
off, and sits at ``standby`` otherwise. Ground truth is kept alongside the
traces so labeling and disaggregation can be checked against it.

Two bundled scenarios:

``separable``
    A 100 W lamp in the evening and a 1000 W kettle in the morning, never on
    together. The test day contains a kettle usage from 07:00 to 07:05.
``benchmark``
    Six appliances with overlapping power levels, duty-cycled cooking and
    noisy loads, loosely modelled on common household devices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .traces import (DAY_SECONDS, ApplianceId, LabelConfig, PowerTrace,
                     StateMask, TraceSet, on_runs)


def hm(hours: int, minutes: int = 0) -> int:
    return hours * 3600 + minutes * 60


@dataclass(frozen=True)
class Session:
    """A usage starting uniformly in ``[earliest, latest]`` lasting ``[min_len, max_len]`` seconds."""

    earliest: int
    latest: int
    min_len: int
    max_len: int
    probability: float = 1.0


@dataclass(frozen=True)
class ApplianceProfile:
    name: str
    type_tag: str
    power: float
    noise: float = 0.0
    standby: float = 0.0
    duty: tuple[int, int] | None = None  # (on, off) seconds while in a session
    sessions: tuple[Session, ...] = ()

    @property
    def appliance(self) -> ApplianceId:
        return ApplianceId(self.name, self.type_tag)


@dataclass(frozen=True)
class Scenario:
    name: str
    days: tuple[date, date]
    profiles: tuple[ApplianceProfile, ...]
    # day index -> appliance name -> fixed (start, stop) sessions, replacing random draws
    fixed: dict[int, dict[str, tuple[tuple[int, int], ...]]] = field(default_factory=dict)
    label_config: LabelConfig = LabelConfig()


@dataclass(frozen=True, eq=False)
class SyntheticDay:
    traces: TraceSet
    truth: StateMask


def _session_mask(profile: ApplianceProfile, spans, min_on: int) -> np.ndarray:
    mask = np.zeros(DAY_SECONDS, bool)
    for start, stop in spans:
        start, stop = max(0, start), min(DAY_SECONDS, stop)
        if profile.duty is None:
            mask[start:stop] = True
        else:
            on, off = profile.duty
            for s in range(start, stop, on + off):
                mask[s:min(s + on, stop)] = True
    # runs shorter than the labeling minimum would not be recoverable as ground truth
    starts, stops = on_runs(mask)
    for a, b in zip(starts, stops):
        if b - a < min_on:
            mask[a:b] = False
    return mask


def generate_day(scenario: Scenario, index: int, rng: np.random.Generator) -> SyntheticDay:
    day = scenario.days[index]
    traces, truth = {}, {}
    fixed = scenario.fixed.get(index, {})
    for profile in scenario.profiles:
        if profile.name in fixed:
            spans = fixed[profile.name]
        else:
            spans = []
            for s in profile.sessions:
                if rng.random() < s.probability:
                    start = int(rng.integers(s.earliest, s.latest + 1))
                    spans.append((start, start + int(rng.integers(s.min_len, s.max_len + 1))))
        rule = scenario.label_config.rule_for(profile.appliance)
        mask = _session_mask(profile, spans, rule.min_on)
        samples = np.full(DAY_SECONDS, profile.standby)
        on_power = profile.power + profile.noise * rng.standard_normal(DAY_SECONDS)
        # keep ON samples clearly above the labeling threshold
        on_power = np.maximum(on_power, rule.on_threshold + 1.0)
        samples[mask] = np.round(on_power[mask], 1)
        appliance = profile.appliance
        traces[appliance] = PowerTrace(day, samples, appliance)
        truth[appliance] = mask
    return SyntheticDay(TraceSet(day, traces), StateMask(day, truth))


def generate(scenario: Scenario, seed: int) -> tuple[SyntheticDay, SyntheticDay]:
    """Training and test day of a scenario."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5CE7A410]))
    return generate_day(scenario, 0, rng), generate_day(scenario, 1, rng)


SEPARABLE = Scenario(
    name="separable",
    days=(date(2024, 3, 4), date(2024, 3, 5)),
    profiles=(
        ApplianceProfile("Lamp", "lamp", power=100.0),
        ApplianceProfile("Kettle", "kettle", power=1000.0),
    ),
    fixed={
        0: {"Kettle": ((hm(6, 40), hm(6, 44)), (hm(7, 30), hm(7, 36)), (hm(8, 15), hm(8, 19))),
            "Lamp": ((hm(18, 10), hm(20, 5)), (hm(20, 50), hm(22, 40)))},
        1: {"Kettle": ((hm(7, 0), hm(7, 5)), (hm(8, 5), hm(8, 11))),
            "Lamp": ((hm(18, 30), hm(22, 15)),)},
    },
)

BENCHMARK = Scenario(
    name="benchmark",
    days=(date(2024, 3, 4), date(2024, 3, 5)),
    profiles=(
        ApplianceProfile("TV-CRT", "tv", power=85.0, noise=3.0, standby=1.2, sessions=(
            Session(hm(7), hm(7, 30), hm(0, 30), hm(1)),
            Session(hm(19), hm(20), hm(1, 30), hm(3)),
        )),
        ApplianceProfile("PC-Desktop", "computer", power=110.0, noise=12.0, standby=2.0, sessions=(
            Session(hm(9), hm(10), hm(2), hm(3, 30)),
            Session(hm(14), hm(15), hm(1, 30), hm(3)),
        )),
        ApplianceProfile("Cooking-stove", "stove", power=1800.0, noise=20.0, duty=(90, 45), sessions=(
            Session(hm(12), hm(12, 30), hm(0, 20), hm(0, 40)),
            Session(hm(18), hm(18, 30), hm(0, 30), hm(0, 50)),
        )),
        ApplianceProfile("Lamp", "lamp", power=60.0, noise=1.0, sessions=(
            Session(hm(6, 30), hm(7), hm(0, 30), hm(1)),
            Session(hm(17), hm(18), hm(3), hm(5)),
        )),
        ApplianceProfile("Monitor-TFT", "monitor", power=32.0, noise=2.0, standby=0.6, sessions=(
            Session(hm(9), hm(10), hm(2), hm(3, 30)),
            Session(hm(14), hm(15), hm(1, 30), hm(3)),
        )),
        ApplianceProfile("TV-LCD", "tv", power=120.0, noise=5.0, standby=0.8, sessions=(
            Session(hm(21), hm(22), hm(1), hm(2)),
            Session(hm(16), hm(17), hm(0, 45), hm(1, 30), probability=0.5),
        )),
    ),
)

SCENARIOS = {s.name: s for s in (SEPARABLE, BENCHMARK)}
