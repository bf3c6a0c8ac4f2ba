"""Rebuild data/mnist/ from the `mnist` npm package (10,000 MNIST digits).

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 make_mnist_subset.py package/src/digits

Pixels are stored in the package as round(p/255, 3); round(v*255) recovers the
original byte exactly. Samples are shuffled with a fixed seed and written as
gzip-compressed IDX files; the first 8,000 rows are the training subset and the
last 2,000 the test subset.
"""
import gzip
import json
import struct
import sys

import numpy as np

src = sys.argv[1]
images, labels = [], []
for digit in range(10):
    with open(f"{src}/{digit}.json") as fh:
        data = np.array(json.load(fh)["data"], dtype=np.float64).reshape(-1, 784)
    px = np.rint(data * 255.0)
    assert np.abs(data * 255.0 - px).max() < 0.2
    images.append(px.astype(np.uint8))
    labels += [digit] * len(data)
images = np.vstack(images)
labels = np.array(labels, dtype=np.uint8)
order = np.random.default_rng(20240607).permutation(len(labels))
images, labels = images[order], labels[order]

with gzip.GzipFile("mnist/mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as fh:
    fh.write(struct.pack(">IIII", 0x803, len(labels), 28, 28))
    fh.write(images.tobytes())
with gzip.GzipFile("mnist/mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as fh:
    fh.write(struct.pack(">II", 0x801, len(labels)))
    fh.write(labels.tobytes())
print(len(labels), np.bincount(labels))
