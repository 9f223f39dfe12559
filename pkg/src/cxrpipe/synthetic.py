"""Desk-scale synthetic radiograph corpus for end-to-end verification.

Each class is a Gaussian bright blob at a class-specific vertical
position on a noisy background.  The positions sit on the vertical
center line so the class signal survives horizontal flips, and the
classes are far enough apart to survive the rotation/shear ranges of
the default augmentation.
"""

from pathlib import Path

import numpy as np

from .dataset import ClassLabel
from .imaging import GrayImage, save_pgm
from .seeding import STREAM_SYNTHETIC, keyed_rng

# Fraction of the image height where each class's blob sits.
_CLASS_ROW = {
    ClassLabel.COVID19: 0.2,
    ClassLabel.NORMAL: 0.4,
    ClassLabel.VIRAL_PNEUMONIA: 0.6,
    ClassLabel.BACTERIAL_PNEUMONIA: 0.8,
}


def synthetic_image(label: ClassLabel, sample: int, side: int = 128, seed: int = 0) -> GrayImage:
    rng = keyed_rng(STREAM_SYNTHETIC, seed, int(label), sample)
    cy = _CLASS_ROW[label] * side + rng.uniform(-2.0, 2.0)
    cx = 0.5 * side + rng.uniform(-2.0, 2.0)
    sigma = 0.1 * side
    ys, xs = np.mgrid[0:side, 0:side]
    blob = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
    noise = rng.random((side, side))
    return GrayImage(np.clip(0.72 * blob + 0.25 * noise, 0.0, 1.0))


def generate_corpus(
    dest: Path, per_class: int = 100, side: int = 128, seed: int = 0
) -> Path:
    """Write PGM images and a manifest under `dest`; returns the manifest path."""
    dest = Path(dest)
    image_dir = dest / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rows = ["path,label"]
    for label in ClassLabel:
        for sample in range(per_class):
            img = synthetic_image(label, sample, side=side, seed=seed)
            name = f"{label.csv_name}_{sample:04d}.pgm"
            (image_dir / name).write_bytes(save_pgm(img, 255))
            rows.append(f"images/{name},{label.csv_name}")
    manifest_path = dest / "manifest.csv"
    manifest_path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
    return manifest_path
