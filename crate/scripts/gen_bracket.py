#!/usr/bin/env python3
"""Generate the bundled bracket fixture: 20 x 20 x 12.5 mm, 0.25 mm layers.

Two perimeters plus rectilinear infill alternating direction per layer.
Absolute extrusion with a G92 E0 reset at each layer start.
"""
import math
import sys

SIZE = 20.0
HEIGHT = 12.5
LAYER = 0.25
LINE_W = 0.45
FIL_D = 1.75
E_PER_MM = (LINE_W * LAYER) / (math.pi * (FIL_D / 2) ** 2)
F_PERIM = 3000
F_INFILL = 3600
F_TRAVEL = 6000
INFILL_SPACING = 5.0


def fmt(v):
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return s if s not in ("-0", "") else "0"


def main(out):
    lines = [
        "; bracket 20x20x12.5 mm, rectilinear, 0.25 mm layers",
        "M104 S215 ; hotend",
        "M140 S60 ; bed",
        "M109 S215",
        "G28",
        "G90",
        "M82 ; absolute extrusion",
        "G92 E0",
    ]
    n_layers = int(round(HEIGHT / LAYER))
    for layer in range(n_layers):
        z = (layer + 1) * LAYER
        e = 0.0
        lines.append(f";LAYER:{layer}")
        lines.append("G92 E0")
        lines.append(f"G1 Z{fmt(z)} F{F_TRAVEL}")
        for inset in (0.0, LINE_W):
            lo, hi = inset, SIZE - inset
            lines.append(f"G0 X{fmt(lo)} Y{fmt(lo)} F{F_TRAVEL}")
            corners = [(hi, lo), (hi, hi), (lo, hi), (lo, lo)]
            px, py = lo, lo
            first = True
            for cx, cy in corners:
                e += math.hypot(cx - px, cy - py) * E_PER_MM
                f = f" F{F_PERIM}" if first else ""
                lines.append(f"G1 X{fmt(cx)} Y{fmt(cy)} E{e:.5f}{f}")
                first = False
                px, py = cx, cy
        lo, hi = 2 * LINE_W, SIZE - 2 * LINE_W
        k = 0
        pos = lo + INFILL_SPACING / 2
        first = True
        while pos < hi:
            a, b = (lo, hi) if k % 2 == 0 else (hi, lo)
            if layer % 2 == 0:
                start, end = (a, pos), (b, pos)
            else:
                start, end = (pos, a), (pos, b)
            lines.append(f"G0 X{fmt(start[0])} Y{fmt(start[1])} F{F_TRAVEL}")
            e += math.hypot(end[0] - start[0], end[1] - start[1]) * E_PER_MM
            f = f" F{F_INFILL}" if first else ""
            lines.append(f"G1 X{fmt(end[0])} Y{fmt(end[1])} E{e:.5f}{f}")
            first = False
            pos += INFILL_SPACING
            k += 1
    lines += [
        "M104 S0",
        "M140 S0",
        f"G1 Z{fmt(HEIGHT + 10)} F{F_TRAVEL} ; lift clear",
        "M84",
    ]
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/bracket_20x20x12.5.gcode")
