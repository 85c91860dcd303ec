#!/usr/bin/env python3
"""Train the shipped desk-scale dictionary data/dict_k16_m8.cscd.

Equivalent CLI invocation:
    spilab learn-dict --corpus data/train --kernels 16 --size 8 \
        --iters 20 --seed 7 --out data/dict_k16_m8.cscd
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from spilab.dictionary import LearnConfig, learn, save_dictionary  # noqa: E402
from spilab.imageio import load_image  # noqa: E402


def main():
    root = pathlib.Path(__file__).resolve().parents[1]
    paths = sorted((root / "data" / "train").glob("*.pgm"))
    corpus = [load_image(p) for p in paths]
    cfg = LearnConfig(beta=1.0, outer_iterations=20, seed=7)
    t0 = time.time()
    dictionary = learn(corpus, kernel_count=16, kernel_size=8, cfg=cfg,
                       corpus_ids=[p.stem for p in paths])
    hist = dictionary.training_meta["objective_history"]
    print("trained in %.1fs, objective %.2f -> %.2f"
          % (time.time() - t0, hist[0], hist[-1]))
    out = root / "data" / "dict_k16_m8.cscd"
    save_dictionary(dictionary, out)
    print("wrote", out, "id", dictionary.dict_id())


if __name__ == "__main__":
    main()
