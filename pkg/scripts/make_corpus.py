#!/usr/bin/env python3
"""Regenerate the shipped image corpus under data/.

Sources are the public-domain sample images bundled with scikit-image
(a development-only dependency; the spilab package itself never imports
it). Each entry crops a fixed region, converts to grayscale luma if
needed, resizes to 64x64, normalizes to full [0, 1] range, and writes a
16-bit PGM. Train and test sets use disjoint source photographs; the test
set covers four groups (person, animal, structure, scenery), three images
each.

Run from the repository root:  python3 scripts/make_corpus.py
"""

import pathlib
import sys

import numpy as np
import skimage.data
import skimage.transform
from skimage.color import rgb2gray

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))
from spilab.imageio import save_image  # noqa: E402

SIZE = 64

# name -> (loader, (top, bottom, left, right) fractional crop box)
TEST_SET = {
    "person_astronaut_face": ("astronaut", (0.02, 0.52, 0.30, 0.80)),
    "person_astronaut": ("astronaut", (0.0, 1.0, 0.0, 1.0)),
    "person_camera": ("camera", (0.05, 0.80, 0.05, 0.80)),
    "animal_cat_face": ("chelsea", (0.0, 1.0, 0.25, 0.92)),
    "animal_cat_eye": ("chelsea", (0.05, 0.60, 0.30, 0.67)),
    "animal_horse": ("horse", (0.0, 1.0, 0.0, 1.0)),
    "structure_brick": ("brick", (0.0, 1.0, 0.0, 1.0)),
    "structure_motorcycle": ("motorcycle", (0.15, 0.95, 0.25, 0.85)),
    "structure_clock": ("clock", (0.0, 1.0, 0.15, 0.95)),
    "scenery_moon": ("moon", (0.0, 1.0, 0.0, 1.0)),
    "scenery_hubble": ("hubble_deep_field", (0.10, 0.90, 0.10, 0.90)),
    "scenery_rocket": ("rocket", (0.0, 0.85, 0.15, 0.85)),
}

TRAIN_SET = {
    "train_coffee_a": ("coffee", (0.0, 1.0, 0.0, 0.67)),
    "train_coffee_b": ("coffee", (0.10, 0.90, 0.33, 1.0)),
    "train_coffee_c": ("coffee", (0.25, 0.75, 0.20, 0.80)),
    "train_coins_a": ("coins", (0.0, 1.0, 0.0, 0.79)),
    "train_coins_b": ("coins", (0.20, 0.95, 0.25, 1.0)),
    "train_page_a": ("page", (0.0, 1.0, 0.0, 1.0)),
    "train_page_b": ("page", (0.20, 0.80, 0.20, 0.80)),
    "train_text_a": ("text", (0.0, 1.0, 0.0, 0.40)),
    "train_text_b": ("text", (0.0, 1.0, 0.45, 0.90)),
    "train_grass_a": ("grass", (0.0, 0.70, 0.0, 0.70)),
    "train_grass_b": ("grass", (0.30, 1.0, 0.30, 1.0)),
    "train_gravel_a": ("gravel", (0.0, 0.60, 0.0, 0.60)),
    "train_gravel_b": ("gravel", (0.40, 1.0, 0.10, 0.70)),
    "train_gravel_c": ("gravel", (0.20, 0.80, 0.40, 1.0)),
    "train_retina_a": ("retina", (0.10, 0.60, 0.20, 0.70)),
    "train_retina_b": ("retina", (0.40, 0.90, 0.30, 0.80)),
    "train_cell": ("cell", (0.0, 1.0, 0.0, 1.0)),
    "train_ihc_a": ("immunohistochemistry", (0.0, 0.70, 0.0, 0.70)),
    "train_ihc_b": ("immunohistochemistry", (0.30, 1.0, 0.30, 1.0)),
    "train_microaneurysms": ("microaneurysms", (0.10, 0.90, 0.10, 0.90)),
}


def load_source(name):
    if name == "motorcycle":
        img = skimage.data.stereo_motorcycle()[0]
    else:
        img = getattr(skimage.data, name)()
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = rgb2gray(img)
    if img.max() > 1.0:
        img /= 255.0
    return img


def prepare(source, box):
    h, w = source.shape
    top, bottom, left, right = box
    crop = source[int(top * h):int(bottom * h), int(left * w):int(right * w)]
    side = min(crop.shape)
    oy = (crop.shape[0] - side) // 2
    ox = (crop.shape[1] - side) // 2
    crop = crop[oy:oy + side, ox:ox + side]
    small = skimage.transform.resize(crop, (SIZE, SIZE), anti_aliasing=True)
    lo, hi = small.min(), small.max()
    return (small - lo) / (hi - lo) if hi > lo else small


def main():
    root = pathlib.Path(__file__).resolve().parents[1] / "data"
    for subdir, table in (("test", TEST_SET), ("train", TRAIN_SET)):
        out = root / subdir
        out.mkdir(parents=True, exist_ok=True)
        for name, (source_name, box) in sorted(table.items()):
            img = prepare(load_source(source_name), box)
            save_image(img, out / (name + ".pgm"))
            print("wrote %s/%s.pgm" % (subdir, name))


if __name__ == "__main__":
    main()
