#!/usr/bin/env python3
"""Convert a NumPy ``.npy`` array of embeddings to the toolkit file format.

Rows that are not unit-norm are normalized (the output header always claims
normalized rows). Example:

    python scripts/convert_npy.py --input clip_image.npy --output images.emb \
        --modality image --dtype f32le
"""

import argparse

import numpy as np

from embedgeo import EmbeddingSet, Modality, normalize_rows
from embedgeo.fileio import save_embeddings


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True, help=".npy file, shape (n, d)")
    parser.add_argument("--output", required=True, help="destination .emb path")
    parser.add_argument("--modality", choices=["image", "text"], default="image")
    parser.add_argument("--dtype", choices=["f32le", "f64le"], default="f64le")
    args = parser.parse_args()

    data = np.load(args.input)
    if data.ndim != 2:
        parser.error(f"expected a 2-D array, got shape {data.shape}")
    embeddings = normalize_rows(EmbeddingSet(data, modality=Modality(args.modality)))
    save_embeddings(embeddings, args.output, dtype=args.dtype)
    print(f"wrote {embeddings.n} x {embeddings.dim} ({args.dtype}) to {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
