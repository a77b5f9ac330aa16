#!/usr/bin/env python3
"""Writes the bundled scene fixture and controller traces.

Output is deterministic. Goldens are produced from these files with
`ghost replay` (see scripts/regen_goldens.sh).
"""

import json
import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "core" / "fixtures"

IDENTITY = [1.0, 0.0, 0.0, 0.0]
BLOCK_HALF = 0.05
# Offset from each block's basket default to its start on the floor.
SPREAD = (1.5, 0.1, 1.4)
# (dx, dz, yaw) perturbation per block, so the start layout is not a grid.
JITTER = [
    (0.004, -0.003, 0.21),
    (-0.002, 0.004, -0.12),
    (0.003, 0.002, 0.05),
    (-0.004, -0.002, -0.24),
    (0.001, 0.003, 0.17),
    (-0.003, -0.004, -0.08),
]


def yaw(theta):
    return [math.cos(theta / 2), 0.0, math.sin(theta / 2), 0.0]


def pose(position, orientation=IDENTITY):
    return {"position": list(position), "orientation": list(orientation)}


def anchor(id_, center, half, walkable=True):
    return {"id": id_, "label": id_, "pose": pose(center), "half_extents": list(half), "walkable_top": walkable}


def block_defaults():
    return [(x, 0.15, z) for z in (0.72, 0.88) for x in (1.36, 1.5, 1.64)]


def block_starts():
    starts = []
    for (x, y, z), (dx, dz, th) in zip(block_defaults(), JITTER):
        starts.append(((x - SPREAD[0] + dx, y - SPREAD[1], z - SPREAD[2] + dz), yaw(th)))
    return starts


def room_tidy():
    objects = []
    for i, (default, (start, rot)) in enumerate(zip(block_defaults(), block_starts()), start=1):
        objects.append(
            {
                "id": f"block_{i}",
                "label": "foam block",
                "pose": pose(start, rot),
                "default_pose": pose(default),
                "half_extents": [BLOCK_HALF] * 3,
                "graspable": True,
            }
        )
    objects.append(
        {
            "id": "bottle",
            "label": "soda bottle",
            "pose": pose((-1.3, 0.15, -1.4)),
            "half_extents": [0.04, 0.15, 0.04],
            "graspable": True,
            "fillable": {"fill_level": 0.2, "capacity_height": 0.25},
        }
    )
    return {
        "version": 1,
        "gravity_up": [0.0, 1.0, 0.0],
        "anchors": [
            anchor("floor", (0.0, -0.05, 0.0), (3.0, 0.05, 3.0)),
            anchor("sofa", (0.0, 0.225, -1.6), (1.0, 0.225, 0.4)),
            anchor("shelf", (2.2, 0.6, -1.0), (0.2, 0.6, 0.5)),
            anchor("basket", (1.5, 0.05, 0.8), (0.3, 0.05, 0.25)),
        ],
        "objects": objects,
    }


def normalize(v):
    n = math.sqrt(sum(c * c for c in v))
    return [c / n for c in v]


def aim(origin, target):
    """Unit quaternion (w, x, y, z) turning local +Z toward `target`."""
    d = normalize([t - o for t, o in zip(target, origin)])
    # Shortest arc from +Z: axis = z x d, w = 1 + z.d.
    w = 1.0 + d[2]
    q = normalize([w, -d[1], d[0], 0.0])
    return q


class Trace:
    def __init__(self):
        self.events = []
        self.tick = 0

    def _next_time(self):
        self.tick += 1
        return self.tick / 60.0

    def pose(self, origin, orientation):
        self.events.append({"t": self._next_time(), "kind": "pose_update", "pose": pose(origin, orientation)})

    def aim(self, origin, target):
        self.pose(origin, aim(origin, target))

    def trigger(self, down):
        self.events.append({"t": self._next_time(), "kind": "trigger_down" if down else "trigger_up"})

    def menu(self, action):
        self.events.append({"t": self._next_time(), "kind": "menu", "action": action})

    def text(self):
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def lasso(trace, apex, center, rx, rz, samples=72):
    trace.aim(apex, (center[0] + rx, 0.0, center[2]))
    trace.trigger(True)
    for i in range(1, samples + 1):
        a = 2 * math.pi * i / samples
        trace.aim(apex, (center[0] + rx * math.cos(a), 0.0, center[2] + rz * math.sin(a)))
    trace.trigger(False)


def carry(trace, start, orientation, delta, lift, steps=30):
    for i in range(1, steps + 1):
        s = i / steps
        h = lift * math.sin(math.pi * s)
        trace.pose((start[0] + s * delta[0], start[1] + s * delta[1] + h, start[2] + s * delta[2]), orientation)


def tidy_trace():
    """Fig. 3: lasso the six floor blocks, carry them to the basket, release
    near the arcs, commit."""
    t = Trace()
    apex = (0.0, 1.4, 0.3)
    lasso(t, apex, (0.0, 0.0, -0.6), 0.4, 0.3)
    grab_target = block_starts()[1][0]
    q = aim(apex, grab_target)
    t.pose(apex, q)
    t.trigger(True)
    release_slop = (0.02, 0.04, -0.03)
    delta = [d + r for d, r in zip(SPREAD, release_slop)]
    carry(t, apex, q, delta, 0.35)
    t.trigger(False)
    t.menu("commit")
    return t


def fill_trace():
    """Fig. 4: click the bottle, raise the hand by half a capacity height
    while filling, commit."""
    t = Trace()
    origin = (-1.3, 1.25, -0.6)
    q = aim(origin, (-1.3, 0.15, -1.4))
    t.pose(origin, q)
    t.trigger(True)
    t.trigger(False)
    t.menu("begin_fill")
    for i in range(1, 11):
        t.pose((origin[0], origin[1] + 0.0125 * i, origin[2]), q)
    t.menu("end_fill")
    t.menu("commit")
    return t


def click_settle_trace():
    """Click one block, carry it over the sofa away from its arc, drop it so
    it settles on the seat, commit."""
    t = Trace()
    origin = (0.0, 1.4, 0.3)
    target = block_starts()[0][0]
    q = aim(origin, target)
    t.pose(origin, q)
    t.trigger(True)
    t.trigger(False)
    t.trigger(True)
    carry(t, origin, q, (0.3, 0.5, -1.1), 0.1, steps=20)
    t.trigger(False)
    t.menu("commit")
    return t


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "room_tidy.json").write_text(json.dumps(room_tidy(), indent=2, sort_keys=True) + "\n")
    traces = FIXTURES / "traces"
    traces.mkdir(exist_ok=True)
    (traces / "tidy_fig3.jsonl").write_text(tidy_trace().text())
    (traces / "fill_fig4.jsonl").write_text(fill_trace().text())
    (traces / "click_settle.jsonl").write_text(click_settle_trace().text())
    (traces / "empty.jsonl").write_text("")


if __name__ == "__main__":
    main()
