#!/usr/bin/env python3
"""Regenerate the bundled track and parameter JSON files.

Run from the repository root:  python3 tools/generate_tracks.py
"""

import json
import math
import pathlib

DATA = pathlib.Path(__file__).resolve().parent.parent / "src" / "motoraceline" / "data"


def default_params():
    return {
        "m": 240.0,
        "I11": 18.0,
        "I22": 60.0,
        "I33": 48.0,
        "lf": 0.75,
        "lr": 0.75,
        "h": 0.5,
        "r": 0.1,
        "epsilon_deg": 30.0,
        "g": 9.81,
        "gamma_max": 0.7,
        "d_max": 0.05,
        "dddot_max": 0.5,
        "P_max": 50000.0,
        "front_tire": {
            "d4": 1.2,
            "d7": 0.15,
            "B_alpha": 8.0,
            "C_alpha": 1.6,
            "k_gamma": 0.07,
            "radius": 0.3,
            "I_spin": 0.6,
        },
        "rear_tire": {
            "d4": 1.2,
            "d7": 0.15,
            "B_alpha": 8.0,
            "C_alpha": 1.6,
            "k_gamma": 0.07,
            "radius": 0.3,
            "I_spin": 0.8,
        },
    }


def flat_ring_track(radius=50.0, npts=28, width=16.0):
    pts = []
    for i in range(npts):
        phi = 2.0 * math.pi * i / npts
        pts.append([radius * math.cos(phi), radius * math.sin(phi), 0.0])
    return {
        "format": 1,
        "name": "flat_ring_r50",
        "periodic": True,
        "centerline": [[round(c, 6) for c in p] for p in pts],
        "cross_section": [[0.0]] * npts,
        "width": width,
    }


def nonplanar_circuit():
    """~600 m circuit: flat straight, gully turn, cresting straight with a
    hill, and a quarter-pipe-profiled turn."""
    pts = []
    cross = []

    def seg(x, y, z, a):
        pts.append([round(x, 3), round(y, 3), round(z, 3)])
        cross.append([round(c, 6) for c in a])

    flat = [0.0, 0.0, 0.0, 0.0, 0.0]
    gully = [0.0, 0.0, 0.08, 0.0, 0.0]
    qpipe = [0.0, -0.32, 0.055, 0.0035, 0.0]

    # straight 1 along +x at y = -60, slight rise mid-way
    for i, x in enumerate(range(-70, 71, 20)):
        z = 2.5 * math.exp(-((x) / 45.0) ** 2)
        seg(x, -60.0, z, flat)
    # turn 1 (gully), radius 45 around (70, -15)
    r1, cx1, cy1 = 45.0, 70.0, -15.0
    for i in range(1, 7):
        ang = -math.pi / 2 + i * (math.pi / 7.5)
        blend = math.sin(min(i, 7 - i) / 3.0 * math.pi / 2) ** 2 if i in (1, 6) else 1.0
        a = [c * blend for c in gully]
        seg(cx1 + r1 * math.cos(ang), cy1 + r1 * math.sin(ang), 0.0, a)
    # short straight heading -x at y = 40 with a hill crest
    for i, x in enumerate(range(60, -61, -24)):
        z = 5.0 * math.exp(-((x + 5.0) / 38.0) ** 2)
        seg(x, 40.0, z, flat)
    # turn 2 (quarter-pipe wall on the outside), radius 38 around (-70, 0)
    r2, cx2, cy2 = 40.0, -70.0, -10.0
    for i in range(1, 7):
        ang = math.pi / 2 + i * (math.pi / 7.5)
        blend = math.sin(min(i, 7 - i) / 3.0 * math.pi / 2) ** 2 if i in (1, 6) else 1.0
        a = [c * blend for c in qpipe]
        seg(cx2 + r2 * math.cos(ang), cy2 + r2 * math.sin(ang), 0.0, a)

    return {
        "format": 1,
        "name": "nonplanar_circuit",
        "periodic": True,
        "centerline": pts,
        "cross_section": cross,
        "width": 10.0,
    }


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    files = {
        "params_default.json": default_params(),
        "flat_ring.json": flat_ring_track(),
        "nonplanar_circuit.json": nonplanar_circuit(),
    }
    for name, payload in files.items():
        path = DATA / name
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
