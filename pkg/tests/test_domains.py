"""Style-domain classification and pool balancing."""

import numpy as np
import pytest

from stylebalance.dataset import Dataset
from stylebalance.domains import (
    DomainAnchor,
    DomainError,
    DomainPool,
    balance_domain_pool,
    build_domain_pools,
    classify_style,
    read_anchor_file,
    read_override_file,
)
from stylebalance.raster import rgb_to_opponent
from conftest import DOMAINS, VOCAB, domain_base_rgb, make_raster, make_record, write_dataset


def anchor_noise_margin(anchors):
    """Half the minimum inter-anchor distance in the working space."""
    means = [np.asarray(a.mean_color) for a in anchors]
    dists = [
        np.linalg.norm(means[i] - means[j])
        for i in range(len(means))
        for j in range(i + 1, len(means))
    ]
    return min(dists) / 2


class TestClassify:
    def test_exact_anchor_mean_is_zero_distance(self, anchors):
        blue = next(a for a in anchors if a.domain == "blue")
        rgb = np.asarray([0.18, 0.34, 0.50])
        image = np.tile(rgb, (16, 16, 1))
        assert np.allclose(rgb_to_opponent(rgb), blue.mean_color)
        assert classify_style(image, anchors) == "blue"

    def test_tie_breaks_to_earlier_anchor(self):
        from stylebalance.raster import mean_opponent_color

        image = np.tile(np.asarray((0.3, 0.3, 0.3)), (4, 4, 1))
        mean = mean_opponent_color(image)
        # +-0.125 is a power of two: both distances are exactly equal
        a = DomainAnchor(
            domain="green", mean_color=(mean[0] + 0.125, mean[1], mean[2]), tolerance=1.0
        )
        b = DomainAnchor(
            domain="blue", mean_color=(mean[0] - 0.125, mean[1], mean[2]), tolerance=1.0
        )
        assert classify_style(image, [a, b]) == "green"
        assert classify_style(image, [b, a]) == "blue"

    def test_forty_synthetic_images_all_correct(self, anchors):
        # oracle = construction: noise amplitude stays below half the
        # minimum inter-anchor distance
        margin = anchor_noise_margin(anchors)
        assert margin > 0.02
        hits = 0
        for index in range(40):
            domain = DOMAINS[index % 4]
            image = make_raster(domain_base_rgb(domain, index), seed=index)
            if classify_style(image, anchors) == domain:
                hits += 1
        assert hits == 40

    def test_permutation_invariant(self, anchors):
        rng = np.random.default_rng(5)
        image = make_raster((0.3, 0.4, 0.5), seed=6)
        flat = image.reshape(-1, 3)
        shuffled = flat[rng.permutation(len(flat))].reshape(image.shape)
        assert classify_style(image, anchors) == classify_style(shuffled, anchors)

    def test_empty_image_rejected(self, anchors):
        with pytest.raises(DomainError):
            classify_style(np.zeros((0, 0, 3)), anchors)

    def test_no_anchors_rejected(self):
        with pytest.raises(DomainError):
            classify_style(np.zeros((2, 2, 3)), [])


class TestPools:
    def test_forty_image_dataset_pools_10_each(self, tmp_path, anchors):
        specs = [
            (f"p{i:02d}", ["scallop"], DOMAINS[i % 4]) for i in range(40)
        ]
        manifest = write_dataset(tmp_path, specs)
        from stylebalance.dataset import load_dataset

        dataset = load_dataset(tmp_path, manifest, VOCAB)
        pool = build_domain_pools(dataset, anchors)
        assert pool.sizes() == {name: 10 for name in DOMAINS}
        # partition: every id in exactly one pool
        all_ids = [i for ids in pool.pools.values() for i in ids]
        assert sorted(all_ids) == sorted(r.id for r in dataset.records)
        assert set(pool.assignments) == set(all_ids)
        # dataset order within each pool
        order = {r.id: n for n, r in enumerate(dataset.records)}
        for ids in pool.pools.values():
            positions = [order[i] for i in ids]
            assert positions == sorted(positions)

    def test_empty_dataset_empty_pools(self, anchors):
        dataset = Dataset(records=(), class_vocabulary=VOCAB)
        pool = build_domain_pools(dataset, anchors)
        assert pool.sizes() == {name: 0 for name in DOMAINS}

    def test_single_anchor_match_fills_one_pool(self, tmp_path, anchors):
        specs = [(f"w{i}", ["starfish"], "white") for i in range(6)]
        manifest = write_dataset(tmp_path, specs)
        from stylebalance.dataset import load_dataset

        dataset = load_dataset(tmp_path, manifest, VOCAB)
        pool = build_domain_pools(dataset, anchors)
        assert pool.sizes() == {"green": 0, "blue": 0, "deepblue": 0, "white": 6}

    def test_unreadable_image_names_record(self, anchors):
        dataset = Dataset(
            records=(make_record("ghost", [], image_path="/nonexistent/ghost.png"),),
            class_vocabulary=VOCAB,
        )
        with pytest.raises(DomainError) as err:
            build_domain_pools(dataset, anchors)
        assert "ghost" in str(err.value)

    def test_override_wins_without_reading_image(self, anchors):
        dataset = Dataset(
            records=(make_record("ghost", [], image_path="/nonexistent/ghost.png"),),
            class_vocabulary=VOCAB,
        )
        pool = build_domain_pools(dataset, anchors, overrides={"ghost": "white"})
        assert pool.assignments == {"ghost": "white"}
        assert pool.pools["white"] == ("ghost",)

    def test_assignments_applied_to_records(self, tmp_path, anchors):
        specs = [("one", ["scallop"], "green")]
        manifest = write_dataset(tmp_path, specs)
        from stylebalance.dataset import load_dataset

        dataset = load_dataset(tmp_path, manifest, VOCAB)
        pool = build_domain_pools(dataset, anchors)
        tagged = dataset.with_domains(pool.assignments)
        assert tagged.records[0].domain == "green"


class TestBalance:
    def _pool(self, sizes):
        pools = {}
        assignments = {}
        for domain, n in sizes.items():
            ids = tuple(f"{domain}{i}" for i in range(n))
            pools[domain] = ids
            for i in ids:
                assignments[i] = domain
        return DomainPool(assignments=assignments, pools=pools)

    def test_already_equal_unchanged(self):
        pool = self._pool({d: 10 for d in DOMAINS})
        assert balance_domain_pool(pool, seed=0).pools == pool.pools

    def test_truncates_to_minimum_subset(self):
        pool = self._pool({"green": 12, "blue": 10, "deepblue": 15, "white": 10})
        balanced = balance_domain_pool(pool, seed=1)
        assert balanced.sizes() == {d: 10 for d in DOMAINS}
        for domain in DOMAINS:
            survivors = balanced.pools[domain]
            assert set(survivors) <= set(pool.pools[domain])
            # relative order preserved
            original = list(pool.pools[domain])
            assert sorted(survivors, key=original.index) == list(survivors)

    def test_one_empty_domain_empties_all(self):
        pool = self._pool({"green": 4, "blue": 0, "deepblue": 2, "white": 3})
        balanced = balance_domain_pool(pool, seed=0)
        assert balanced.sizes() == {d: 0 for d in DOMAINS}

    def test_deterministic(self):
        pool = self._pool({"green": 9, "blue": 5, "deepblue": 7, "white": 6})
        one = balance_domain_pool(pool, seed=42)
        two = balance_domain_pool(pool, seed=42)
        assert one.pools == two.pools


class TestConfigFiles:
    def test_anchor_file_round_trip(self, tmp_path):
        path = tmp_path / "anchors.conf"
        path.write_text(
            "# calibrated anchors\n"
            "green: 0.22 0.42 0.30 0.25\n"
            "blue: 0.18 0.34 0.50 0.25\n"
        )
        anchors = read_anchor_file(path)
        assert [a.domain for a in anchors] == ["green", "blue"]
        expected = rgb_to_opponent(np.asarray([0.22, 0.42, 0.30]))
        assert np.allclose(anchors[0].mean_color, expected)

    def test_anchor_file_bad_line(self, tmp_path):
        path = tmp_path / "anchors.conf"
        path.write_text("green: 0.1 0.2\n")
        with pytest.raises(DomainError):
            read_anchor_file(path)

    def test_override_file(self, tmp_path):
        path = tmp_path / "overrides.tsv"
        path.write_text("img_a\tblue\nimg_b\twhite\n")
        assert read_override_file(path) == {"img_a": "blue", "img_b": "white"}
