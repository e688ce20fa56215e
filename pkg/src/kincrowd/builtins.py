"""Named, ready-to-run scenarios.

Quantities the experiments leave numerically open (cluster placement and
size, obstacle footprints, measurement areas) were read off the published
layout figures; each such key is listed in the config's ``provenance`` table
as ``figure-derived``.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import ConfigError
from .scenario import ScenarioConfig

FIG = "figure-derived"

ROOM = [0.0, 0.0, 10.0, 10.0]
BOX = [0.0, 0.0, 14.0, 10.0]                   # 4 m of open floor past the exit wall
EXTENSION_WALLS = [[10.0, 0.0, 14.0, 0.0], [10.0, 10.0, 14.0, 10.0]]
ROOM_REFS = {"length_m": 10 * math.sqrt(2), "speed_m_s": 2.0, "capacity_per_m2": 7.0}
ROOM_BOUNDARIES = {"left": "wall", "right": "outflow", "bottom": "wall", "top": "wall"}

# interaction rates counted per second rather than per reference time
MODEL = {"alpha": 1.0, "epsilon": 0.4, "velocity_law": "cubic", "directions": 8,
         "rate_time_unit_s": 1.0}
RATE_NOTE = "rates per second: reproduces the reported evacuation times"

MESHES = {"coarse": (0.5, 1.5), "medium": (0.25, 0.75), "fine": (0.125, 0.375)}


def _room(name, description, exits, clusters, *, dx=0.25, dt=0.75, t_end=60.0,
          obstacles=(), measurements=(), provenance=None, law="cubic") -> dict:
    geometry = {"box": BOX, "room": ROOM, "extra_walls": EXTENSION_WALLS,
                "exits": [dict(e) for e in exits]}
    if obstacles:
        geometry["obstacles"] = [dict(o) for o in obstacles]
    d = {"scenario": {"name": name, "description": description},
         "references": dict(ROOM_REFS),
         "model": dict(MODEL, velocity_law=law),
         "geometry": geometry,
         "clusters": [dict(c) for c in clusters],
         "numerics": {"dx": dx, "dy": dx, "dt": dt, "t_end": t_end, "substeps": "auto"},
         "boundaries": dict(ROOM_BOUNDARIES),
         "output": {"snapshot_every": 1.5, "stop_when_evacuated": True, "lane_metric": False},
         "provenance": {"geometry.box": "computational extension beyond the exit wall",
                        "model.rate_time_unit_s": RATE_NOTE,
                        **(provenance or {})}}
    if measurements:
        d["measurements"] = [dict(m) for m in measurements]
    return d


# -- one exit, two opposing clusters --------------------------------------------
ONE_EXIT = {"label": "exit", "side": "right", "center": 5.0, "width": 2.6}
TWO_CLUSTERS_46 = [
    {"shape": "circle", "center": [2.5, 7.5], "radius": 1.5, "direction": 7,
     "profile": "constant", "density": 0.47, "persons": 23.0},
    {"shape": "circle", "center": [2.5, 2.5], "radius": 1.5, "direction": 3,
     "profile": "constant", "density": 0.47, "persons": 23.0},
]


def room_one_exit_46(mesh: str = "medium") -> dict:
    dx, dt = MESHES[mesh]
    return _room(f"room-one-exit-46" + ("" if mesh == "medium" else f"-{mesh}"),
                 f"46 people in two clusters heading at each other, one 2.6 m exit, {mesh} mesh",
                 [ONE_EXIT], TWO_CLUSTERS_46, dx=dx, dt=dt,
                 provenance={"clusters.0.center": FIG, "clusters.0.radius": FIG,
                             "clusters.1.center": FIG, "clusters.1.radius": FIG})


# -- two exits (0.7 m and 1.1 m, 3 m apart) ---------------------------------------
EXIT_1 = {"label": "exit1", "side": "right", "center": 2.95, "width": 0.7}
EXIT_2 = {"label": "exit2", "side": "right", "center": 6.85, "width": 1.1}
TWO_EXIT_AREAS = [
    {"label": "exit1", "region": [8.0, 1.95, 10.0, 3.95], "exit": "exit1"},
    {"label": "exit2", "region": [8.0, 5.85, 10.0, 7.85], "exit": "exit2"},
]
TWO_EXIT_PROV = {"geometry.exits": "centres placed with a 3 m gap between exit edges, "
                                   "group centred on the wall",
                 "measurements": FIG + ": 2 m x 2 m squares against each exit"}

LAYOUTS = {
    138: [{"shape": "rectangle", "center": [5.5, 5.0], "size": [3.0, 7.0], "direction": 1,
           "profile": "constant", "density": 0.61, "persons": 90.0},
          {"shape": "rectangle", "center": [2.5, 5.0], "size": [3.0, 3.0], "direction": 1,
           "profile": "linear", "front_density": 0.6, "back_density": 0.924, "persons": 48.0}],
    40: [{"shape": "rectangle", "center": [2.5, 5.0], "size": [3.0, 3.0], "direction": 1,
          "profile": "linear", "front_density": 0.45, "back_density": 0.82, "persons": 40.0}],
    18: [{"shape": "rectangle", "center": [2.0, 5.0], "size": [2.0, 2.0], "direction": 1,
          "profile": "linear", "front_density": 0.45, "back_density": 0.836, "persons": 18.0}],
}


def room_two_exit(persons: int, law: str = "cubic") -> dict:
    prov = dict(TWO_EXIT_PROV)
    for k in range(len(LAYOUTS[persons])):
        prov[f"clusters.{k}"] = FIG + " placement and size; front density chosen, "\
                                      "slope fixed by the person count"
    return _room(f"room-two-exit-{persons}",
                 f"{persons} people heading to a wall with a 0.7 m and a 1.1 m exit",
                 [EXIT_1, EXIT_2], LAYOUTS[persons], dt=0.375, t_end=120.0,
                 measurements=TWO_EXIT_AREAS, provenance=prov, law=law)


# -- obstacles near the exit ------------------------------------------------------
OBSTACLE_START = [{"shape": "rectangle", "center": [2.625, 5.0], "size": [3.25, 2.5],
                   "direction": 1, "profile": "constant", "density": 0.8, "persons": 44.0}]
EFFECTIVE_AREAS = {1: [[6.15, 3.75, 8.15, 6.25]],
                   2: [[6.15, 6.25, 8.15, 8.75], [6.15, 1.25, 8.15, 3.75]]}
MARGIN = 0.05


def footprint(area, alpha_eff: float) -> list:
    """Real obstacle inside an effective area, a quarter of its size.

    For ``alpha_eff = 1`` a square against the upstream face; otherwise a
    slender rectangle (height 2.2 times its width) against the downstream face.
    """
    x0, y0, x1, y1 = area
    a = (x1 - x0) * (y1 - y0) / 4
    yc = (y0 + y1) / 2
    if alpha_eff >= 1.0:
        s = math.sqrt(a)
        return [x0 + MARGIN, yc - s / 2, x0 + MARGIN + s, yc + s / 2]
    w = math.sqrt(a / 2.2)
    h = a / w
    return [x1 - MARGIN - w, yc - h / 2, x1 - MARGIN, yc + h / 2]


def room_obstacle(config: int, alpha_eff: float) -> dict:
    obstacles = [{"effective_area": area, "footprint": footprint(area, alpha_eff),
                  "alpha_eff": alpha_eff} for area in EFFECTIVE_AREAS[config]]
    prov = {"clusters.0": FIG, "geometry.obstacles": FIG + " effective areas and footprints"}
    return _room(f"room-obstacle-{config}-a{alpha_eff:g}",
                 f"44 people, obstacle configuration {config}, alpha {alpha_eff:g} in the "
                 "effective area", [ONE_EXIT], OBSTACLE_START, t_end=120.0,
                 obstacles=obstacles, provenance=prov)


def room_no_obstacle_44() -> dict:
    return _room("room-no-obstacle-44", "44 people, one 2.6 m exit, no obstacles",
                 [ONE_EXIT], OBSTACLE_START, t_end=120.0, provenance={"clusters.0": FIG})


# -- bidirectional corridor --------------------------------------------------------
CORRIDOR_SIDES = {98: 2.2, 188: 3.0}


def corridor_lanes(persons: int) -> dict:
    side = CORRIDOR_SIDES[persons]
    clusters = [{"shape": "rectangle", "center": [x, 2.5], "size": [side, side],
                 "direction": 1 if x < 10 else 5, "profile": "parabolic",
                 "peak_density": 1.0, "edge_density": 0.6, "persons": persons / 4}
                for x in (2.5, 7.5, 12.5, 17.5)]
    return {"scenario": {"name": f"corridor-lanes-{persons}",
                         "description": f"{persons} people in four groups walking in opposite "
                                        "directions along a periodic corridor"},
            "references": {"length_m": 5 * math.sqrt(17), "speed_m_s": 2.0,
                           "capacity_per_m2": 7.0},
            "model": dict(MODEL),
            "geometry": {"box": [0.0, 0.0, 20.0, 5.0], "room": [0.0, 0.0, 20.0, 5.0],
                         "open_sides": ["left", "right"]},
            "clusters": clusters,
            "numerics": {"dx": 0.2, "dy": 0.2, "dt": 0.3, "t_end": 90.0, "substeps": "auto"},
            "boundaries": {"left": "periodic", "right": "periodic", "bottom": "wall",
                           "top": "wall"},
            "output": {"snapshot_every": 1.5, "stop_when_evacuated": False, "lane_metric": True},
            "provenance": {"clusters": FIG + " centres; square side chosen so the peak stays "
                                             "at or below 1 after matching the person count",
                           "model.epsilon": "same panic weight as the room scenarios",
                           "model.rate_time_unit_s": RATE_NOTE}}


REGISTRY: dict[str, Callable[[], dict]] = {
    "room-one-exit-46": room_one_exit_46,
    "room-one-exit-46-coarse": lambda: room_one_exit_46("coarse"),
    "room-one-exit-46-fine": lambda: room_one_exit_46("fine"),
    "room-two-exit-138": lambda: room_two_exit(138),
    "room-two-exit-40": lambda: room_two_exit(40),
    "room-two-exit-18": lambda: room_two_exit(18),
    "room-no-obstacle-44": room_no_obstacle_44,
    "room-obstacle-1-a1": lambda: room_obstacle(1, 1.0),
    "room-obstacle-1-a0": lambda: room_obstacle(1, 0.0),
    "room-obstacle-2-a1": lambda: room_obstacle(2, 1.0),
    "room-obstacle-2-a0": lambda: room_obstacle(2, 0.0),
    "corridor-lanes-98": lambda: corridor_lanes(98),
    "corridor-lanes-188": lambda: corridor_lanes(188),
}


def names() -> list[str]:
    return list(REGISTRY)


def builtin(name: str) -> ScenarioConfig:
    if name not in REGISTRY:
        raise ConfigError(f"unknown built-in scenario {name!r}; try one of {names()}", "scenario")
    return ScenarioConfig.from_dict(REGISTRY[name]())
