"""Regenerate the golden wire-format fixtures from the server-side package.

Run from the repository root with the Python package installed:

    python frontend/test/make_golden.py

Each fixture holds a captured gesture (absolute per-stroke points with
timestamps) and the exact relative 3-tuple sequence the server parses it to.
"""

import json
from pathlib import Path

import numpy as np

from livesketch.sketch import Sketch, sketch_from_absolute

OUT = Path(__file__).parent / "golden"


def gesture(strokes):
    t = 0.0
    captured = []
    for stroke in strokes:
        pts = []
        for x, y in stroke:
            pts.append({"x": float(x), "y": float(y), "t": t})
            t += 16.7
        captured.append(pts)
    return captured


def main() -> None:
    rng = np.random.default_rng(424242)
    cases = {
        "single_stroke": [[(10, 10), (40, 12), (70, 30), (90, 80)]],
        "two_strokes": [[(0, 0), (50, 0), (50, 50)], [(10, 60), (80, 60)]],
        "dot_then_line": [[(30, 30)], [(0, 100), (100, 100), (100, 0)]],
        "fractional_coords": [
            [(10.25, 7.5), (11.75, 9.125), (40.0625, 33.5)],
            [(5.5, 80.25), (90.125, 79.0)],
        ],
        "random_scrawl": [
            np.column_stack(
                [np.cumsum(rng.integers(-9, 10, size=12)), np.cumsum(rng.integers(-9, 10, size=12))]
            ).tolist(),
            np.column_stack(
                [np.cumsum(rng.integers(-9, 10, size=7)) + 50, np.cumsum(rng.integers(-9, 10, size=7)) - 20]
            ).tolist(),
        ],
    }
    OUT.mkdir(parents=True, exist_ok=True)
    for name, strokes in cases.items():
        sketch = sketch_from_absolute([np.asarray(s, dtype=float) for s in strokes])
        # server-side parse of the client payload must be the identity
        reparsed = Sketch(sketch.points.tolist())
        assert reparsed == sketch
        fixture = {
            "gesture": gesture(strokes),
            "expected_points": [[p[0], p[1], int(p[2])] for p in sketch.points.tolist()],
        }
        (OUT / f"{name}.json").write_text(json.dumps(fixture, indent=1))
        print(f"wrote {name}: {len(fixture['expected_points'])} points")


if __name__ == "__main__":
    main()
