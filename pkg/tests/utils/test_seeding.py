from sentidrop.utils.seeding import derive_rng, derive_seed, FOLDS, TREES


def test_same_path_same_stream():
    assert derive_rng(7, TREES, 3).random() == derive_rng(7, TREES, 3).random()
    assert derive_seed(7, FOLDS) == derive_seed(7, FOLDS)


def test_paths_are_independent():
    assert derive_rng(7, TREES, 0).random() != derive_rng(7, TREES, 1).random()
    assert derive_rng(7, TREES).random() != derive_rng(7, FOLDS).random()
    assert derive_seed(7, TREES) != derive_seed(8, TREES)


def test_derived_seed_is_64_bit():
    assert 0 <= derive_seed(0, FOLDS) < 2**64
