#!/usr/bin/env python3
"""Convert the digit JSON files shipped by the npm `mnist` package into IDX files.

The package stores 10,000 MNIST digits as 3-decimal floats (value/255), which
round back to the original bytes exactly. Per class, the last TEST_PER_CLASS
digits go to the test split and the rest to the train split. Both splits are
written class-interleaved (round robin over classes) so that any prefix is
roughly balanced.

usage: convert_mnist_json.py <package/src/digits> <out_dir>
"""
import json
import struct
import sys
from pathlib import Path

TEST_PER_CLASS = 200


def load_digits(digits_dir):
    per_class = []
    for d in range(10):
        data = json.loads((Path(digits_dir) / f"{d}.json").read_text())["data"]
        n = len(data) // 784
        imgs = []
        for i in range(n):
            row = data[i * 784:(i + 1) * 784]
            b = bytes(int(round(v * 255)) for v in row)
            assert all(abs(x / 255 - v) < 1e-3 for x, v in zip(b, row))
            imgs.append(b)
        per_class.append(imgs)
    return per_class


def interleave(per_class):
    out = []
    longest = max(len(c) for c in per_class)
    for i in range(longest):
        for label, imgs in enumerate(per_class):
            if i < len(imgs):
                out.append((imgs[i], label))
    return out


def write_idx(prefix, items):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(items), 28, 28))
        for img, _ in items:
            f.write(img)
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(items)))
        f.write(bytes(label for _, label in items))


def main():
    digits_dir, out_dir = sys.argv[1], Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    per_class = load_digits(digits_dir)
    train = interleave([c[:-TEST_PER_CLASS] for c in per_class])
    test = interleave([c[-TEST_PER_CLASS:] for c in per_class])
    write_idx(out_dir / "train", train)
    write_idx(out_dir / "t10k", test)
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()
