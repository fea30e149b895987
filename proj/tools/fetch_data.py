#!/usr/bin/env python3
"""Fetch the benchmark datasets into data/ in their native UCI / IDX layouts.

Sources are package registries, which are reachable from most build machines
even when the original dataset hosts are not:

  * MNIST IDX files ship inside the npm package ``mnist-data``.
  * LETTER and the YEAST one-vs-rest slices ship inside the PyPI wheel
    ``keel-ds`` (KEEL repository exports of the UCI files).

The KEEL export has no multi-class YEAST file, only binary slices.  The
10-class labels are reassembled from the five full-size slices (NUC, ME3,
ME2, ME1, EXC) and the pairwise slices, then cross-checked against every
remaining slice.  Sequence names are not part of the KEEL export, so the
first column of yeast.data holds a synthetic row id.

Nothing is downloaded unless --yes is given.
"""

import argparse
import collections
import gzip
import io
import json
import pathlib
import subprocess
import sys
import tarfile
import tempfile
import urllib.request
import zipfile

NPM_REGISTRY = "https://registry.npmjs.org"
MNIST_PACKAGE = "mnist-data"
KEEL_WHEEL = "keel-ds==0.2.5"
MNIST_FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]

# KEEL numbers the yeast classes; these come from the slice sizes.
KEEL_YEAST_CLASS = {0: "MIT", 1: "NUC", 2: "CYT", 3: "ME1", 4: "ME2",
                    5: "ME3", 6: "EXC", 7: "VAC", 8: "POX", 9: "ERL"}
YEAST_COUNTS = {"CYT": 463, "NUC": 429, "MIT": 244, "ME3": 163, "ME2": 51,
                "ME1": 44, "EXC": 35, "VAC": 30, "POX": 20, "ERL": 5}


def fetch_mnist(out: pathlib.Path) -> None:
    meta = json.load(urllib.request.urlopen(f"{NPM_REGISTRY}/{MNIST_PACKAGE}"))
    version = meta["dist-tags"]["latest"]
    tarball = meta["versions"][version]["dist"]["tarball"]
    blob = urllib.request.urlopen(tarball).read()
    out.mkdir(parents=True, exist_ok=True)
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        for name in MNIST_FILES:
            member = tar.getmember(f"package/data/{name}")
            raw = tar.extractfile(member).read()
            with gzip.GzipFile(out / f"{name}.gz", "wb", mtime=0) as gz:
                gz.write(raw)
    print(f"mnist: wrote {len(MNIST_FILES)} files to {out}")


def download_keel(tmp: pathlib.Path) -> zipfile.ZipFile:
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                    "--quiet", "-d", str(tmp), KEEL_WHEEL], check=True)
    wheel = next(tmp.glob("keel_ds-*.whl"))
    return zipfile.ZipFile(wheel)


def keel_rows(wheel: zipfile.ZipFile, member: str):
    text = wheel.read(member).decode()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        fields = [f.strip() for f in line.split(",")]
        rows.append((fields[:-1], fields[-1]))
    return rows


def write_letter(wheel: zipfile.ZipFile, out: pathlib.Path) -> None:
    rows = keel_rows(wheel, "keel_ds/data/balanced/raw/letter.dat")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "letter-recognition.data", "w", newline="\n") as f:
        for features, letter in rows:
            f.write(",".join([letter] + features) + "\n")
    print(f"letter: wrote {len(rows)} rows to {out}")


def write_yeast(wheel: zipfile.ZipFile, out: pathlib.Path) -> None:
    def load(name):
        rows = keel_rows(wheel, f"keel_ds/data/imbalanced/raw/{name}.dat")
        return [(tuple(round(float(v), 2) for v in f), label) for f, label in rows]

    def project(features, width):
        # 7-attribute slices drop the constant-ish pox column.
        return features if width == 8 else features[:5] + features[6:]

    base = load("yeast1")
    labels = [None] * len(base)

    def assign(tuples, cls):
        width = len(tuples[0])
        need = collections.Counter(tuples)
        for i, (features, _) in enumerate(base):
            key = project(features, width)
            if labels[i] is None and need[key] > 0:
                labels[i] = cls
                need[key] -= 1
        if sum(need.values()):
            raise RuntimeError(f"yeast: could not place every {cls} row")

    for name, cls in [("yeast1", "NUC"), ("yeast3", "ME3"), ("yeast4", "ME2"),
                      ("yeast5", "ME1"), ("yeast6", "EXC"),
                      ("yeast-1_vs_7", "VAC"), ("yeast-2_vs_8", "POX")]:
        assign([f for f, l in load(name) if l == "positive"], cls)

    # ERL = positives of {ME1, VAC, POX, ERL} minus the rows already placed.
    erl_pool = collections.Counter(
        f for f, l in load("yeast-0-2-5-6_vs_3-7-8-9") if l == "positive")
    for features, cls in zip((f for f, _ in base), labels):
        if cls in ("ME1", "VAC", "POX") and erl_pool[features] > 0:
            erl_pool[features] -= 1
    assign(list(erl_pool.elements()), "ERL")
    assign([f for f, l in load("yeast-2_vs_4") if l == "negative"], "CYT")
    labels = [cls or "MIT" for cls in labels]

    if collections.Counter(labels) != YEAST_COUNTS:
        raise RuntimeError(f"yeast: class counts {collections.Counter(labels)}")

    slices = ["yeast-0-2-5-6_vs_3-7-8-9", "yeast-0-2-5-7-9_vs_3-6-8",
              "yeast-0-3-5-9_vs_7-8", "yeast-0-5-6-7-9_vs_4",
              "yeast-1-2-8-9_vs_7", "yeast-1-4-5-8_vs_7", "yeast-1_vs_7",
              "yeast-2_vs_4"]
    for name in slices:
        neg, pos = name.removeprefix("yeast-").split("_vs_")
        neg = {KEEL_YEAST_CLASS[int(c)] for c in neg.split("-")}
        pos = {KEEL_YEAST_CLASS[int(c)] for c in pos.split("-")}
        rows = load(name)
        width = len(rows[0][0])
        expected = collections.Counter(
            (project(f, width), "positive" if c in pos else "negative")
            for (f, _), c in zip(base, labels) if c in neg | pos)
        if collections.Counter(rows) != expected:
            raise RuntimeError(f"yeast: reconstruction disagrees with {name}")

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "yeast.data", "w", newline="\n") as f:
        for i, ((features, _), cls) in enumerate(zip(base, labels)):
            values = "  ".join(f"{v:.2f}" for v in features)
            f.write(f"KEEL_{i + 1:04d}  {values}  {cls}\n")
    print(f"yeast: wrote {len(base)} rows to {out}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "data"))
    parser.add_argument("--only", choices=["mnist", "uci"], help="fetch a single group")
    parser.add_argument("--yes", action="store_true", help="consent to network downloads")
    args = parser.parse_args()
    if not args.yes:
        print("refusing to download without --yes", file=sys.stderr)
        return 2
    out = pathlib.Path(args.out)
    if args.only in (None, "mnist"):
        fetch_mnist(out / "mnist")
    if args.only in (None, "uci"):
        with tempfile.TemporaryDirectory() as tmp:
            wheel = download_keel(pathlib.Path(tmp))
            write_letter(wheel, out / "letter")
            write_yeast(wheel, out / "yeast")
    return 0


if __name__ == "__main__":
    sys.exit(main())
