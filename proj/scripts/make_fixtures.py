#!/usr/bin/env python3
"""Regenerate the bundled data fixtures.

Writes data/table1_reference.csv (the published state-level table) and the
synthetic demo dataset under data/demo/. Everything is deterministic; commit
the outputs alongside this script.
"""

import json
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")

# state, ifr_percent, population, deaths, deaths_per_million,
# infections (k) +95% bounds, infections previous 14d (k) +bounds,
# attack rate % +bounds
TABLE1 = [
    ("State of Mexico", 0.59, 17338220, 6392, 369, 4460, 4070, 4800, 1130, 1020, 1230, 25.7, 23.5, 27.7),
    ("Mexico City", 0.65, 9025363, 6119, 678, 3060, 2840, 3270, 473, 440, 504, 33.9, 31.5, 36.2),
    ("Baja California", 0.40, 3606940, 2139, 593, 1710, 1590, 1820, 346, 322, 367, 47.4, 44.1, 50.4),
    ("Veracruz", 1.00, 8514724, 1921, 226, 620, 561, 672, 90, 76, 103, 7.3, 6.6, 7.9),
    ("Puebla", 0.87, 6573843, 1627, 247, 844, 750, 925, 254, 212, 290, 12.8, 11.4, 14.1),
    ("Sinaloa", 0.80, 3143980, 1533, 488, 677, 616, 731, 142, 124, 158, 21.5, 19.6, 23.3),
    ("Tabasco", 0.69, 2558349, 1276, 499, 857, 778, 927, 329, 292, 362, 33.5, 30.4, 36.2),
    ("Sonora", 0.61, 3056397, 1069, 350, 1030, 925, 1120, 301, 273, 327, 33.6, 30.3, 36.5),
    ("Guerrero", 1.00, 3650850, 1054, 289, 355, 321, 385, 67, 58, 75, 9.7, 8.8, 10.5),
    ("Jalisco", 0.60, 8368602, 931, 111, 1190, 1070, 1290, 572, 507, 630, 14.2, 12.8, 15.5),
    ("Chiapas", 0.84, 5688998, 728, 128, 362, 318, 399, 90, 74, 104, 6.4, 5.6, 7.0),
    ("Morelos", 0.84, 2033373, 724, 356, 244, 217, 268, 28, 21, 33, 12.0, 10.7, 13.2),
    ("Hidalgo", 0.93, 3068696, 723, 236, 362, 311, 404, 128, 101, 149, 11.8, 10.1, 13.2),
    ("Chihuahua", 0.59, 3783680, 707, 187, 356, 314, 391, 50, 37, 60, 9.4, 8.3, 10.3),
    ("Oaxaca", 1.10, 4132318, 695, 168, 288, 257, 316, 90, 78, 101, 7.0, 6.2, 7.6),
    ("Quintana Roo", 0.58, 1704010, 666, 391, 663, 580, 737, 325, 275, 370, 38.9, 34.0, 43.2),
    ("Michoacan", 0.91, 4808791, 551, 115, 243, 213, 269, 64, 51, 73, 5.1, 4.4, 5.6),
    ("Yucatan", 0.94, 2246505, 545, 243, 463, 392, 522, 249, 201, 290, 20.6, 17.5, 23.2),
    ("Tamaulipas", 0.63, 3635833, 528, 145, 574, 505, 632, 253, 217, 284, 15.8, 13.9, 17.4),
    ("Guanajuato", 0.70, 6201449, 508, 82, 518, 450, 577, 244, 202, 278, 8.4, 7.3, 9.3),
    ("Nuevo Leon", 0.45, 5571904, 487, 87, 933, 824, 1030, 499, 433, 558, 16.7, 14.8, 18.5),
    ("Tlaxcala", 0.72, 1372108, 433, 316, 223, 195, 247, 47, 38, 55, 16.2, 14.2, 18.0),
    ("Coahuila", 0.44, 3197188, 328, 103, 829, 733, 912, 509, 448, 562, 25.9, 22.9, 28.5),
    ("Queretaro", 0.53, 2259471, 325, 144, 485, 428, 535, 270, 236, 300, 21.4, 19.0, 23.7),
    ("Campeche", 0.84, 992306, 258, 260, 176, 151, 196, 70, 58, 80, 17.7, 15.2, 19.7),
    ("Nayarit", 0.76, 1279671, 233, 182, 223, 196, 246, 111, 97, 123, 17.4, 15.3, 19.2),
    ("San Luis Potosi", 0.95, 2856171, 232, 81, 174, 144, 198, 84, 66, 99, 6.1, 5.0, 6.9),
    ("Durango", 0.74, 1861051, 172, 92, 221, 187, 249, 131, 108, 150, 11.9, 10.1, 13.4),
    ("Aguascalientes", 0.54, 1425105, 171, 120, 171, 139, 197, 63, 46, 76, 12.0, 9.7, 13.8),
    ("Zacatecas", 0.77, 1660543, 129, 78, 159, 129, 183, 94, 73, 111, 9.6, 7.8, 11.0),
    ("Baja California Sur", 0.53, 796398, 95, 119, 129, 97.6, 154, 70, 49, 87, 16.2, 12.3, 19.3),
    ("Colima", 0.60, 778989, 82, 105, 113, 92.5, 131, 62, 50, 72, 14.5, 11.9, 16.8),
]

DEMO_TOTAL_DEATHS = 36906  # national headline figure the demo series must sum to
DEMO_START = (2020, 3, 5)
DEMO_DAYS = 125  # 2020-03-05 .. 2020-07-07


def iso_dates(start, n):
    import datetime

    d0 = datetime.date(*start)
    return [(d0 + datetime.timedelta(days=t)).isoformat() for t in range(n)]


def largest_remainder(weights, total):
    """Integer allocation of `total` proportional to `weights`."""
    scaled = [w * total / sum(weights) for w in weights]
    base = [int(x) for x in scaled]
    short = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: scaled[i] - base[i], reverse=True)
    for i in order[:short]:
        base[i] += 1
    return base


def daily_series(total, n_days, peak, width):
    """Non-negative integer daily counts summing exactly to `total`."""
    weights = [math.exp(-((t - peak) / width) ** 2 / 2.0) for t in range(n_days)]
    cum_w = 0.0
    all_w = sum(weights)
    out = []
    prev = 0
    for t in range(n_days):
        cum_w += weights[t]
        cum = round(total * cum_w / all_w)
        out.append(cum - prev)
        prev = cum
    assert sum(out) == total and min(out) >= 0
    return out


def write_table1():
    path = os.path.join(DATA, "table1_reference.csv")
    with open(path, "w") as f:
        f.write(
            "state,ifr_percent,population,deaths,deaths_per_million,"
            "infections_thousands,infections_lo95,infections_hi95,"
            "infections_14d_thousands,infections_14d_lo95,infections_14d_hi95,"
            "attack_rate_percent,attack_rate_lo95,attack_rate_hi95\n"
        )
        for row in TABLE1:
            f.write(",".join(str(v) for v in row) + "\n")
    print(f"wrote {path} ({len(TABLE1)} states)")


def write_demo():
    demo = os.path.join(DATA, "demo")
    os.makedirs(demo, exist_ok=True)
    dates = iso_dates(DEMO_START, DEMO_DAYS)

    deaths_by_state = largest_remainder([r[3] for r in TABLE1], DEMO_TOTAL_DEATHS)

    with open(os.path.join(demo, "deaths_mx.csv"), "w") as f:
        f.write("state,date,deaths\n")
        for (row, total) in zip(TABLE1, deaths_by_state):
            name = row[0]
            # stagger the peaks a little so the states are not clones
            peak = 70.0 + 12.0 * math.sin(hash_name(name))
            series = daily_series(total, DEMO_DAYS, peak, 22.0)
            for date, d in zip(dates, series):
                f.write(f"{name},{date},{d}\n")
    assert_total(os.path.join(demo, "deaths_mx.csv"))

    with open(os.path.join(demo, "mobility_mx.csv"), "w") as f:
        f.write("state,date,k1,k2,k3,k4\n")
        for row in TABLE1:
            name = row[0]
            offset = 0.02 * math.sin(hash_name(name) * 2.0)
            for t, date in enumerate(dates):
                drop = -0.45 * min(max(t / 35.0, 0.0), 1.0)
                rebound = 0.18 * min(max((t - 80) / 30.0, 0.0), 1.0)
                k1 = round(drop + rebound + offset, 4)
                f.write(f"{name},{date},{k1},{round(k1 * 0.8, 4)},{round(k1 * 0.5, 4)},{round(k1 * 0.3, 4)}\n")

    with open(os.path.join(demo, "population_mx.csv"), "w") as f:
        f.write("state,population\n")
        for row in TABLE1:
            f.write(f"{row[0]},{row[2]}\n")

    with open(os.path.join(demo, "ifr_mx.csv"), "w") as f:
        f.write("state,ifr_percent\n")
        for row in TABLE1:
            f.write(f"{row[0]},{row[1]}\n")

    manifest = {
        "deaths": "deaths_mx.csv",
        "mobility": "mobility_mx.csv",
        "population": "population_mx.csv",
        "ifr": "ifr_mx.csv",
        "as_of_date": "2020-07-07",
        "output_dir": "out",
        "chains": {"n_chains": 2, "n_warmup": 300, "n_samples": 300, "seed": 1},
        "model": {"dispersion_form": "linear", "seed_days": 6},
    }
    with open(os.path.join(demo, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    print(f"wrote {demo}")


def hash_name(name):
    h = 0
    for ch in name:
        h = (h * 131 + ord(ch)) % 1000003
    return h % 628 / 100.0  # stable pseudo-angle in [0, 2pi)


def assert_total(path):
    total = 0
    with open(path) as f:
        next(f)
        for line in f:
            total += int(line.rsplit(",", 1)[1])
    assert total == DEMO_TOTAL_DEATHS, f"{path} sums to {total}"


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    write_table1()
    write_demo()
