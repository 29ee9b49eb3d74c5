#!/usr/bin/env python3
"""Build the bundled fallback digit dataset in IDX format.

Sources the scikit-learn handwritten digits (8x8, 1797 samples), upsamples
each to 28x28 with bilinear interpolation at a jittered scale and offset,
and writes MNIST-compatible IDX files under data/.

Train and test draw from disjoint source images. All images are unrotated;
rotation policy is applied downstream at load time.
"""

import struct
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

OUT = Path(__file__).resolve().parent.parent / "data"
TRAIN_N = 12000
TEST_N = 2400
SEED = 12345


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 2051, len(images), 28, 28))
        f.write(np.asarray(images, dtype=np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 2049, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def render(img8, rng):
    s = rng.uniform(2.4, 3.1)
    up = zoom(img8.astype(np.float64), s, order=1)
    up = np.clip(up / 16.0 * 255.0, 0, 255)
    h, w = up.shape
    canvas = np.zeros((28, 28), dtype=np.float64)
    r0 = (28 - h) // 2 + rng.integers(-2, 3)
    c0 = (28 - w) // 2 + rng.integers(-2, 3)
    r0 = int(np.clip(r0, 0, 28 - h))
    c0 = int(np.clip(c0, 0, 28 - w))
    canvas[r0 : r0 + h, c0 : c0 + w] = up
    return canvas.astype(np.uint8)


def synthesize(pool_images, pool_labels, count, rng):
    idx = rng.integers(0, len(pool_images), size=count)
    images = np.zeros((count, 28, 28), dtype=np.uint8)
    labels = np.zeros(count, dtype=np.uint8)
    for i, j in enumerate(idx):
        images[i] = render(pool_images[j], rng)
        labels[i] = pool_labels[j]
    return images, labels


def main():
    rng = np.random.default_rng(SEED)
    ds = load_digits()
    images, labels = ds.images, ds.target

    train_img, train_lab, test_img, test_lab = [], [], [], []
    for d in range(10):
        sel = np.where(labels == d)[0]
        rng.shuffle(sel)
        cut = int(len(sel) * 0.8)
        train_img.append(images[sel[:cut]])
        train_lab.append(labels[sel[:cut]])
        test_img.append(images[sel[cut:]])
        test_lab.append(labels[sel[cut:]])

    train_pool = np.concatenate(train_img), np.concatenate(train_lab)
    test_pool = np.concatenate(test_img), np.concatenate(test_lab)

    tr_x, tr_y = synthesize(*train_pool, TRAIN_N, rng)
    te_x, te_y = synthesize(*test_pool, TEST_N, rng)

    OUT.mkdir(exist_ok=True)
    write_idx_images(OUT / "train-images-idx3-ubyte", tr_x)
    write_idx_labels(OUT / "train-labels-idx1-ubyte", tr_y)
    write_idx_images(OUT / "t10k-images-idx3-ubyte", te_x)
    write_idx_labels(OUT / "t10k-labels-idx1-ubyte", te_y)
    print(f"wrote {TRAIN_N} train / {TEST_N} test images to {OUT}")


if __name__ == "__main__":
    sys.exit(main())
