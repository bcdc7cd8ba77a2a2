#!/usr/bin/env python3
"""Generate the bundled single-lane roundabout layouts under assets/layouts/.

Traffic circulates counter-clockwise (right-hand traffic). Each arm carries an
inbound lane on its right-hand side and an outbound lane on the other side.
The navigable space is one outer polygon (ring plus flared arms) and the
central island; the even-odd rule carves the island out.
"""

import json
import math
import os
import sys


def bezier(p0, p1, p2, p3, t):
    u = 1.0 - t
    return (
        u * u * u * p0[0] + 3 * u * u * t * p1[0] + 3 * u * t * t * p2[0] + t * t * t * p3[0],
        u * u * u * p0[1] + 3 * u * u * t * p1[1] + 3 * u * t * t * p2[1] + t * t * t * p3[1],
    )


def sample_bezier(p0, p1, p2, p3, step=0.5):
    dense = [bezier(p0, p1, p2, p3, i / 400.0) for i in range(401)]
    length = sum(math.dist(a, b) for a, b in zip(dense, dense[1:]))
    n = max(2, int(math.ceil(length / step)))
    return [bezier(p0, p1, p2, p3, i / n) for i in range(n + 1)]


def add(a, b, s=1.0):
    return (a[0] + s * b[0], a[1] + s * b[1])


def ring_point(rc, ang):
    return (rc * math.cos(ang), rc * math.sin(ang))


def ring_tangent(ang):
    return (-math.sin(ang), math.cos(ang))


def ring_arc(rc, a0, a1, step=1.0):
    while a1 <= a0:
        a1 += 2 * math.pi
    n = max(2, int(math.ceil(rc * (a1 - a0) / step)))
    return [ring_point(rc, a0 + (a1 - a0) * i / n) for i in range(n + 1)]


def rounded(points):
    out = []
    for x, y in points:
        p = [round(x, 6), round(y, 6)]
        if not out or out[-1] != p:
            out.append(p)
    return out


def build(name, rc, lane, arm_deg, r_start=50.0, r_goal=40.0, lane_offset=2.0,
          arm_half=4.0, merge_deg=20.0, stop_gap=2.0):
    r_out = rc + lane / 2
    r_in = rc - lane / 2
    r_stop = r_out + stop_gap
    r_merge = r_stop - 1.0
    arms = [math.radians(a) for a in arm_deg]
    delta = math.radians(merge_deg)

    entries, exits = [], []
    merge_angles, exit_angles = [], []
    for phi in arms:
        u = (math.cos(phi), math.sin(phi))
        n = (-math.sin(phi), math.cos(phi))
        inward = (-u[0], -u[1])

        start = add(add((0, 0), u, r_start), n, lane_offset)
        a = add(add((0, 0), u, r_merge), n, lane_offset)
        b_ang = phi + delta
        b = ring_point(rc, b_ang)
        curve = sample_bezier(a, add(a, inward, 4.0), add(b, ring_tangent(b_ang), -4.0), b)
        approach = [start] + curve
        stop_station = r_start - r_stop
        entries.append({"approach": approach, "stop_station": stop_station})
        merge_angles.append(b_ang)

        e_ang = phi - delta
        e = ring_point(rc, e_ang)
        c = add(add((0, 0), u, r_merge), n, -lane_offset)
        goal = add(add((0, 0), u, r_goal), n, -lane_offset)
        curve = sample_bezier(e, add(e, ring_tangent(e_ang), 4.0), add(c, u, -4.0), c)
        exits.append(curve + [goal])
        exit_angles.append(e_ang)

    # Active route after the approach: around the ring to the next arm, then out.
    k = len(arms)
    order = sorted(range(k), key=lambda i: arms[i] % (2 * math.pi))
    for pos, i in enumerate(order):
        j = order[(pos + 1) % k]
        arc = ring_arc(rc, merge_angles[i], exit_angles[j])
        entries[i]["merged"] = arc + exits[j][1:]

    # Navigable outer boundary: circle arcs between flared arm mouths.
    flare = math.radians(22.0)
    r_flare = r_out + 1.0
    outer = []
    arm_sorted = sorted(arms, key=lambda a: a % (2 * math.pi))
    for idx, phi in enumerate(arm_sorted):
        u = (math.cos(phi), math.sin(phi))
        n = (-math.sin(phi), math.cos(phi))
        outer.append(ring_point(r_out, phi - flare))
        outer.append(add(add((0, 0), u, r_flare), n, -arm_half))
        outer.append(add(add((0, 0), u, r_start + 1.0), n, -arm_half))
        outer.append(add(add((0, 0), u, r_start + 1.0), n, arm_half))
        outer.append(add(add((0, 0), u, r_flare), n, arm_half))
        outer.append(ring_point(r_out, phi + flare))
        nxt = arm_sorted[(idx + 1) % len(arm_sorted)]
        a0, a1 = phi + flare, nxt - flare
        while a1 <= a0:
            a1 += 2 * math.pi
        steps = max(2, int(math.ceil((a1 - a0) / math.radians(3.0))))
        for s in range(1, steps):
            outer.append(ring_point(r_out, a0 + (a1 - a0) * s / steps))

    island = [ring_point(r_in, 2 * math.pi * i / 120) for i in range(120)]
    ring = ring_arc(rc, 0.0, 2 * math.pi)

    return {
        "schema_version": 1,
        "name": name,
        "lane_width": lane_offset * 2,
        "navigable_polygons": [rounded(outer), rounded(island)],
        "entries": [
            {"approach": rounded(e["approach"]), "stop_station": e["stop_station"],
             "merged": rounded(e["merged"])}
            for e in entries
        ],
        "circulation": [rounded(ring)],
        "exits": [rounded(x) for x in exits],
    }


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "assets", "layouts")
    os.makedirs(root, exist_ok=True)
    layouts = [
        build("training", rc=16.0, lane=5.0, arm_deg=[-90.0, 30.0, 150.0]),
        build("unseen", rc=22.0, lane=5.5, arm_deg=[-100.0, -10.0, 75.0, 165.0]),
    ]
    for layout in layouts:
        with open(os.path.join(root, layout["name"] + ".json"), "w") as f:
            json.dump(layout, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
