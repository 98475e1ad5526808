"""Synthetic trace generators for the two demo scenarios.

Both are deterministic in their seed: the same configuration produces
byte-identical trace files. Timestamps are jittered so that events almost
never coincide with pane boundaries or clock ticks, mimicking sporadic
sensor arrivals.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass
class PidConfig:
    """Temperature controller: sensor and reference rows plus a disturbance
    step that pushes the smoothed error over the trigger threshold."""

    seed: int = 1
    duration_s: float = 100.0
    rate_hz: float = 4.0
    reference: float = 20.0
    noise: float = 0.002
    step_at: float = 30.0
    step_until: float = 70.0
    disturbance: float = 0.05

    def validate(self) -> None:
        if self.duration_s <= 0 or self.rate_hz <= 0:
            raise ValueError("duration and rate must be positive")
        if not 0 <= self.step_at <= self.step_until:
            raise ValueError("need 0 <= step-at <= step-until")


PID_HEADER = ["time", "temperature", "reference"]


def generate_pid(cfg: PidConfig) -> list[list]:
    cfg.validate()
    rng = random.Random(cfg.seed)
    rows: list[list] = []
    ts = 0.0
    mean_dt = 1.0 / cfg.rate_hz
    while True:
        ts += mean_dt * rng.uniform(0.5, 1.5)
        if ts >= cfg.duration_s:
            break
        temp = cfg.reference + rng.gauss(0.0, cfg.noise)
        if cfg.step_at <= ts < cfg.step_until:
            temp += cfg.disturbance
        rows.append([ts, temp, cfg.reference])
    return rows


@dataclass
class FleetConfig:
    """Fleet of cars reporting pick-up events; some cars misbehave by picking
    customers up off-road. One car can be forced to a fixed number of
    off-road pick-ups, and one car can be retired mid-trace."""

    seed: int = 1
    cars: int = 50
    events: int = 600
    duration_s: float = 4 * 3600.0
    pickup_rate: float = 0.5
    misbehavior: float = 0.0  # probability that a pick-up happens off-road
    force_car: int | None = None
    force_pickups: int = 6
    retire_car: int | None = None
    retire_at: float | None = None

    def validate(self) -> None:
        if self.cars <= 0 or self.events <= 0 or self.duration_s <= 0:
            raise ValueError("cars, events, and duration must be positive")
        if not 0 <= self.misbehavior <= 1 or not 0 <= self.pickup_rate <= 1:
            raise ValueError("rates must lie in [0, 1]")
        if self.force_car is not None and not 0 <= self.force_car < self.cars:
            raise ValueError("force-car must name one of the cars")


FLEET_HEADER = ["time", "CID", "offRoad", "pickUp", "retire"]


def generate_fleet(cfg: FleetConfig) -> list[list]:
    cfg.validate()
    rng = random.Random(cfg.seed)
    times = sorted(rng.uniform(0.0, cfg.duration_s) for _ in range(cfg.events))
    rows: list[list] = []
    forced_remaining = cfg.force_pickups if cfg.force_car is not None else 0
    forced_every = max(1, cfg.events // (cfg.force_pickups + 1))
    for i, ts in enumerate(times):
        if forced_remaining and i % forced_every == forced_every - 1:
            car = cfg.force_car
            off_road, pick_up = True, True
            forced_remaining -= 1
        else:
            car = rng.randrange(cfg.cars)
            if cfg.force_car is not None and car == cfg.force_car:
                # the forced car's organic events stay clean so the forced
                # count is exact
                off_road, pick_up = False, False
            else:
                pick_up = rng.random() < cfg.pickup_rate
                off_road = pick_up and rng.random() < cfg.misbehavior
        rows.append([ts, car, off_road, pick_up, False])
    if cfg.retire_car is not None:
        at = cfg.retire_at if cfg.retire_at is not None else cfg.duration_s
        rows.append([at, cfg.retire_car, False, False, True])
        rows.sort(key=lambda r: r[0])
    return rows
