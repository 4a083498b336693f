#!/usr/bin/env python3
"""Convert a UCI-HAR download into the canonical shlb CSV.

Two layouts are understood:

  * the original "UCI HAR Dataset" (train/ and test/ with Inertial Signals):
    128-sample windows at 50% overlap are stitched back into continuous
    recordings, total_acc (g) and body_gyro (rad/s) as channels;
  * the HAPT release with RawData/ (acc_expXX_userYY.txt, gyro_..., labels.txt):
    labelled segments of the six basic activities become recordings.

Usage: ucihar_to_csv.py <dataset dir> <out.csv>
"""

import argparse
import csv
import sys
from pathlib import Path

ACTIVITIES = {
    1: "Walking",
    2: "Walking Upstairs",
    3: "Walking Downstairs",
    4: "Sitting",
    5: "Standing",
    6: "Laying",
}
HEADER = ["subject_id", "recording_id", "activity", "acc_x", "acc_y", "acc_z",
          "gyro_x", "gyro_y", "gyro_z"]


def read_rows(path):
    with open(path) as f:
        return [line.split() for line in f if line.strip()]


def inertial_recordings(root):
    """Yields (subject, activity, [[6 floats] ...]) from the windowed layout."""
    for split in ("train", "test"):
        base = root / split
        signals = base / "Inertial Signals"
        subjects = [int(r[0]) for r in read_rows(base / f"subject_{split}.txt")]
        labels = [int(r[0]) for r in read_rows(base / f"y_{split}.txt")]
        names = [f"total_acc_{a}" for a in "xyz"] + [f"body_gyro_{a}" for a in "xyz"]
        channels = [read_rows(signals / f"{n}_{split}.txt") for n in names]
        n = len(subjects)
        if len(labels) != n or any(len(c) != n for c in channels):
            sys.exit(f"{base}: window counts disagree")

        current, key = [], None
        for w in range(n):
            width = len(channels[0][w])
            window = [[float(channels[c][w][t]) for c in range(6)] for t in range(width)]
            if (subjects[w], labels[w]) != key:
                if current:
                    yield key[0], key[1], current
                key, current = (subjects[w], labels[w]), list(window)
            else:
                # consecutive windows share their first half with the previous one
                current.extend(window[width // 2:])
        if current:
            yield key[0], key[1], current


def raw_recordings(root):
    """Yields (subject, activity, samples) from the HAPT RawData layout."""
    raw = root / "RawData"
    cache = {}
    for exp, user, act, start, end in (map(int, r) for r in read_rows(raw / "labels.txt")):
        if act not in ACTIVITIES:
            continue  # postural transitions are not part of the six-class task
        if exp not in cache:
            acc = read_rows(raw / f"acc_exp{exp:02d}_user{user:02d}.txt")
            gyro = read_rows(raw / f"gyro_exp{exp:02d}_user{user:02d}.txt")
            cache = {exp: [[float(v) for v in a + g] for a, g in zip(acc, gyro)]}
        yield user, act, cache[exp][start - 1:end]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("dataset", type=Path)
    p.add_argument("out", type=Path)
    args = p.parse_args()

    if (args.dataset / "RawData" / "labels.txt").exists():
        source = raw_recordings(args.dataset)
    elif (args.dataset / "train" / "Inertial Signals").is_dir():
        source = inertial_recordings(args.dataset)
    else:
        sys.exit(f"{args.dataset}: neither RawData/labels.txt nor train/Inertial Signals found")

    recordings = samples = 0
    with open(args.out, "w", newline="") as f:
        out = csv.writer(f, lineterminator="\n")
        out.writerow(HEADER)
        for subject, activity, rows in source:
            if activity not in ACTIVITIES:
                sys.exit(f"unknown activity id {activity}")
            recordings += 1
            for r in rows:
                out.writerow([subject, recordings, ACTIVITIES[activity]] + [repr(v) for v in r])
            samples += len(rows)
    print(f"{recordings} recordings, {samples} samples -> {args.out}")


if __name__ == "__main__":
    main()
