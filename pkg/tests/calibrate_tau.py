"""Measure self-match distances DIST(m, g.m) on the toy corpus.

Run with ``python3 tests/calibrate_tau.py``. Prints the 99th percentile and
maximum self-distance over every ARR copy and a handful of random rigid
motions of each model, plus the smallest distance between distinct models.
TAU_RASTER in conftest.py was chosen from this output.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import TOY_TEST_SEED, TOY_TRAIN_SEED  # noqa: E402

from viewsub.arr import enumerate_arr  # noqa: E402
from viewsub.mesh import transform_mesh  # noqa: E402
from viewsub.retrieval import (  # noqa: E402
    model_distance,
    preprocess_database_model,
    preprocess_query,
    query_from_descriptor,
)
from viewsub.subspace import assemble_training_matrix, train_pca  # noqa: E402
from viewsub.synthetic import random_rotation, toy_corpus  # noqa: E402


def main(n_motions: int = 4, seed: int = 0):
    rng = np.random.default_rng(seed)
    train = toy_corpus(10, seed=TOY_TRAIN_SEED)
    test = toy_corpus(10, seed=TOY_TEST_SEED)
    pca = train_pca(assemble_training_matrix([m for _, _, m in train]), 40)
    db = [preprocess_database_model(m, pca, 0.4, mid) for mid, _, m in test]

    selfd = []
    for d, (_, _, mesh) in zip(db, test):
        moved = [transform_mesh(mesh, e.signed_perm) for e in enumerate_arr()]
        moved += [transform_mesh(mesh, random_rotation(rng), rng.normal(size=3)) for _ in range(n_motions)]
        for m in moved:
            selfd.append(model_distance(preprocess_query(m, pca, 0.4), d, np.sqrt(2.0)))
    selfd = np.array(selfd)

    cross = min(
        model_distance(query_from_descriptor(a), b, np.sqrt(2.0))
        for i, a in enumerate(db)
        for b in db[i + 1:]
    )
    print(f"self-distance samples: {selfd.size}")
    print(f"99th percentile:        {np.percentile(selfd, 99):.3e}")
    print(f"maximum:                {selfd.max():.3e}")
    print(f"closest distinct pair:  {cross:.3e}")


if __name__ == "__main__":
    main()
