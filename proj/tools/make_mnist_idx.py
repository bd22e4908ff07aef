#!/usr/bin/env python3
"""Pack the digit JSON files shipped in the `mnist` npm package into IDX files.

Usage: make_mnist_idx.py <package/src/digits> <out_dir> [--test 2000] [--seed 7]

Writes train-images-idx3-ubyte / train-labels-idx1-ubyte and
t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte with a seeded shuffle so
every class appears in both splits.
"""
import argparse
import json
import random
import struct
from pathlib import Path


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        data = json.loads(Path(args.digits_dir, f"{digit}.json").read_text())["data"]
        for i in range(len(data) // 784):
            px = data[i * 784:(i + 1) * 784]
            samples.append(([min(255, max(0, round(v * 255))) for v in px], digit))

    random.Random(args.seed).shuffle(samples)
    test, train = samples[:args.test], samples[args.test:]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for prefix, split in (("train", train), ("t10k", test)):
        write_images(out / f"{prefix}-images-idx3-ubyte", [s[0] for s in split])
        write_labels(out / f"{prefix}-labels-idx1-ubyte", [s[1] for s in split])
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()
