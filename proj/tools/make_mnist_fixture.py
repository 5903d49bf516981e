#!/usr/bin/env python3
"""Build the MNIST subset fixture in tests/data/mnist.

The source is the 5000-image MNIST sample bundled with the mlxtend wheel
(labels in the last column, rows sorted by class). The rows are shuffled with
a fixed seed; the first 2000 become the train split and the next 500 the
test split, written as standard IDX files.
"""
import argparse
import glob
import gzip
import os
import random
import struct
import subprocess
import tempfile
import zipfile

TRAIN, TEST = 2000, 500


def load_rows(wheel):
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    rows = []
    for line in text.splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        rows.append((bytes(vals[:-1]), vals[-1]))
    return rows


def write_split(out, prefix, rows):
    with open(os.path.join(out, prefix + "-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for img, _ in rows:
            f.write(img)
    with open(os.path.join(out, prefix + "-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel", help="mlxtend wheel; downloaded with pip when omitted")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "data", "mnist"))
    args = ap.parse_args()
    wheel = args.wheel
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.run(["pip", "download", "mlxtend==0.24.0", "--no-deps", "-d", tmp, "-q"], check=True)
        wheel = glob.glob(os.path.join(tmp, "*.whl"))[0]
    rows = load_rows(wheel)
    random.Random(0).shuffle(rows)
    os.makedirs(args.out, exist_ok=True)
    write_split(args.out, "train", rows[:TRAIN])
    write_split(args.out, "t10k", rows[TRAIN:TRAIN + TEST])


if __name__ == "__main__":
    main()
