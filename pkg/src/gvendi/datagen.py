"""Synthetic benchmark data: blobby feature matrices and template corpora.

These generators back the test suite and the demo scripts. blob_features
builds a unit-row feature matrix whose rows cluster around a set of random
directions; template_corpus builds a text corpus from per-family vocabularies
so that gradient featurization produces the same kind of clustered geometry
from real pipeline input.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import Corpus, Sample
from .featmat import FeatureMatrix, Provenance
from .rng import rng_from


def blob_features(
    n_blobs: int,
    per_blob: int | Sequence[int],
    dim: int,
    center_seed: int,
    point_seed: int,
    spread: float = 0.1,
) -> FeatureMatrix:
    """Unit-row matrix of `n_blobs` Gaussian blobs around random directions.

    per_blob may be a single count or one count per blob. Separate center
    and point seeds allow held-out draws from the same blob centers.
    """
    if n_blobs < 1 or dim < 2:
        raise ValueError("need n_blobs >= 1 and dim >= 2")
    sizes = [per_blob] * n_blobs if isinstance(per_blob, int) else list(per_blob)
    if len(sizes) != n_blobs or any(s < 0 for s in sizes):
        raise ValueError("per_blob must give one nonnegative count per blob")
    c_rng = rng_from(center_seed, 0xB10B)
    centers = c_rng.normal(size=(n_blobs, dim))
    centers /= np.linalg.norm(centers, axis=1)[:, None]
    rows, ids = [], []
    p_rng = rng_from(point_seed, 0xB10C)
    for b, size in enumerate(sizes):
        pts = centers[b] + spread * p_rng.normal(size=(size, dim))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        rows.append(pts)
        ids.extend(f"blob{b}-{i}" for i in range(size))
    data = np.vstack(rows) if rows else np.zeros((0, dim))
    return FeatureMatrix(
        data.astype(np.float32),
        tuple(ids),
        Provenance("external", fingerprint=0, seed=point_seed),
    )


_SYLLABLES = (
    "ka", "ro", "mi", "ta", "zu", "len", "vor", "sha", "pel", "dun",
    "gri", "os", "ne", "bal", "tir", "qua", "yem", "fos", "cil", "rah",
)


def _family_words(family: int, seed: int, n_words: int = 8) -> list[str]:
    rng = rng_from(seed, 0xFA3, family)
    words = []
    for _ in range(n_words):
        parts = rng.choice(len(_SYLLABLES), size=3)
        words.append("".join(_SYLLABLES[int(p)] for p in parts) + str(family))
    return words


def template_corpus(
    n_families: int,
    per_family: int | Sequence[int],
    seed: int,
    name: str = "synthetic",
) -> Corpus:
    """Corpus of templated word problems with family-specific vocabulary.

    Nearly every token is drawn from a per-family vocabulary and each family
    applies its own arithmetic rule, so samples within a family share both
    wording and solution shape while differing in numerals. Their proxy
    gradients form one blob per family. Each sample is tagged with its
    family.
    """
    sizes = [per_family] * n_families if isinstance(per_family, int) else list(per_family)
    if len(sizes) != n_families:
        raise ValueError("per_family must give one count per family")
    rules = (
        lambda a, b: a + b,
        lambda a, b: a * 2 + b,
        lambda a, b: abs(a - b) + 1,
        lambda a, b: a + b * 3,
        lambda a, b: a * b % 89 + 1,
    )
    samples = []
    for fam, size in enumerate(sizes):
        words = _family_words(fam, seed)
        rule = rules[fam % len(rules)]
        rng = rng_from(seed, 0xFA4, fam)
        for i in range(size):
            a, b = int(rng.integers(2, 60)), int(rng.integers(2, 60))
            w = [words[int(j)] for j in rng.choice(len(words), size=6, replace=False)]
            input_text = (
                f"{w[0]} {w[1]} holds {a} {w[2]} while {w[3]} brings {b} {w[4]} "
                f"toward {w[5]} counting {w[0]} {w[4]} altogether"
            )
            answer = rule(a, b)
            output_text = (
                f"{w[1]} {w[3]} combine {a} with {b} under {w[5]} giving "
                f"{w[2]} total \\boxed{{{answer}}}"
            )
            samples.append(
                Sample(
                    id=f"{name}-f{fam}-{i}",
                    input=input_text,
                    output=output_text,
                    tags=(f"family-{fam}",),
                )
            )
    return Corpus(tuple(samples), name=name)
