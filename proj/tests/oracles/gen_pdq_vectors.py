#!/usr/bin/env python3
"""Writes real test images as PGM/PPM and records PDQ vectors from the
reference implementation (ThreatExchange C++ via the `pdqhash` package).

Run once; the outputs under tests/data/pdq/ are committed and treated as
frozen oracle data by the test suites.
"""
import pathlib
import numpy as np
import pdqhash
import skimage.data
from PIL import Image

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "pdq"
MAX_DIM = 320
NAMES = ["astronaut", "camera", "coffee", "chelsea", "coins", "moon", "page",
         "text", "clock", "immunohistochemistry", "rocket", "brick",
         "colorwheel", "grass"]
KEEP_NATIVE = {"camera"}


def write_pnm(path, arr):
    h, w = arr.shape[:2]
    magic = b"P5" if arr.ndim == 2 else b"P6"
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    lines = ["# file\treference_hex\treference_quality",
             "# reference_hex: ThreatExchange Hash256::format() order (bit 255 first)"]
    for name in NAMES:
        arr = getattr(skimage.data, name)()
        if name not in KEEP_NATIVE and max(arr.shape[:2]) > MAX_DIM:
            img = Image.fromarray(arr)
            scale = MAX_DIM / max(arr.shape[:2])
            size = (max(1, round(arr.shape[1] * scale)), max(1, round(arr.shape[0] * scale)))
            arr = np.asarray(img.resize(size, Image.LANCZOS))
        fname = name + (".pgm" if arr.ndim == 2 else ".ppm")
        write_pnm(OUT / fname, arr)
        rgb = arr if arr.ndim == 3 else np.stack([arr] * 3, axis=-1)
        bits, quality = pdqhash.compute(np.ascontiguousarray(rgb))
        # bits[0] is reference bit 255; pack into the reference hex form.
        hexstr = "".join("%x" % int("".join(str(int(b)) for b in bits[i:i + 4]), 2)
                         for i in range(0, 256, 4))
        lines.append(f"{fname}\t{hexstr}\t{quality}")
    (OUT / "reference_vectors.tsv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
