"""Build the desk-scale MNIST IDX fixtures under data/mnist-desk/.

Source: the `mnist` npm package (10,000 MNIST digits stored as JSON arrays of
pixel intensities in [0, 1], rounded to three decimals). Fetch it with

    npm pack mnist && tar xzf mnist-*.tgz

and pass the extracted `package/src/digits` directory as the first argument.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

TRAIN, TEST = 4000, 1000


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as fh:
        fh.write(header + bytes(payload))


def main():
    digits = Path(sys.argv[1])
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("data/mnist-desk")
    samples = []
    for label in range(10):
        raw = json.loads((digits / f"{label}.json").read_text())["data"]
        for k in range(len(raw) // 784):
            px = [min(255, max(0, round(v * 255))) for v in raw[k * 784:(k + 1) * 784]]
            samples.append((px, label))
    random.Random(20180529).shuffle(samples)
    for name, part in (("train", samples[:TRAIN]), ("t10k", samples[TRAIN:TRAIN + TEST])):
        images = [p for px, _ in part for p in px]
        labels = [lab for _, lab in part]
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, [len(part), 28, 28], images)
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, [len(part)], labels)


if __name__ == "__main__":
    main()
