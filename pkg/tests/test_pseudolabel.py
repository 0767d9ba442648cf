import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ferforge.core import ClassLabel, ImageRecord, Posterior
from ferforge.pseudolabel import FilterPolicy, assign, filter, select_top


def brute_force_argmax(probs):
    """Independent oracle: scan for the max, lowest index wins ties."""
    best_i, best_p = 0, probs[0]
    for i, p in enumerate(probs):
        if p > best_p:
            best_i, best_p = i, p
    return best_i, best_p


def random_posteriors(n, seed):
    rng = np.random.default_rng(seed)
    return [
        Posterior(f"p{i:05d}", tuple(map(float, rng.dirichlet(np.ones(7) * 0.5))))
        for i in range(n)
    ]


class TestAssign:
    def test_clear_argmax(self):
        post = Posterior("x", (0.05, 0.05, 0.05, 0.60, 0.05, 0.10, 0.10))
        assert assign(post) == (ClassLabel.HAPPINESS, 0.60)

    def test_uniform_tie_breaks_low_index(self):
        post = Posterior("x", tuple([1.0 / 7] * 7))
        label, conf = assign(post)
        assert label is ClassLabel.ANGER
        assert conf == pytest.approx(1.0 / 7)

    def test_matches_brute_force_oracle(self):
        for post in random_posteriors(1000, seed=7):
            label, conf = assign(post)
            oracle_i, oracle_p = brute_force_argmax(post.probs)
            assert label.value == oracle_i
            assert conf == oracle_p

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_argmax_scale_invariance(self, seed):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(7))
        scaled = probs * 3.5
        scaled = scaled / scaled.sum()
        a = assign(Posterior("a", tuple(map(float, probs))))[0]
        b = assign(Posterior("b", tuple(map(float, scaled))))[0]
        assert a == b


class TestFilter:
    def test_below_threshold_discarded(self):
        post = Posterior("x", (0.29, 0.12, 0.12, 0.12, 0.12, 0.12, 0.11))
        kept, discarded = filter([post], FilterPolicy(threshold=0.3))
        assert kept == [] and discarded == 1

    def test_exact_threshold_kept(self):
        post = Posterior("x", (0.30, 0.12, 0.12, 0.12, 0.12, 0.12, 0.10))
        kept, discarded = filter([post], FilterPolicy(threshold=0.3))
        assert len(kept) == 1 and discarded == 0
        assert kept[0].confidence == 0.30

    def test_matches_rescan_oracle(self):
        posts = random_posteriors(10_000, seed=3)
        policy = FilterPolicy(threshold=0.3)
        kept, discarded = filter(posts, policy)
        oracle_ids = [p.image_id for p in posts if max(p.probs) >= 0.3]
        assert [k.image_id for k in kept] == oracle_ids
        assert discarded == len(posts) - len(oracle_ids)


class TestSelectTop:
    def test_under_cap_takes_all(self):
        # A class whose passing pool is smaller than the cap keeps every sample.
        rng = np.random.default_rng(5)
        posts = []
        for i in range(2039):
            probs = np.full(7, 0.05)
            probs[ClassLabel.FEAR.value] = 0.7
            probs = probs / probs.sum()
            probs = probs + rng.uniform(-0.001, 0.001, 7)
            probs[ClassLabel.FEAR.value] += 1.0 - probs.sum()
            posts.append(Posterior(f"f{i:05d}", tuple(map(float, probs))))
        policy = FilterPolicy(threshold=0.3, per_class_cap=10_000)
        kept, _ = filter(posts, policy)
        manifest = select_top(kept, policy)
        assert len(manifest) == 2039
        assert all(r.label is ClassLabel.FEAR for r in manifest)

    def test_over_cap_order_law(self):
        rng = np.random.default_rng(11)
        posts = []
        for i in range(12_000):
            spread = rng.dirichlet(np.ones(6))
            conf = float(rng.uniform(0.51, 1.0 - 1e-9))
            probs = np.empty(7)
            probs[0] = conf
            probs[1:] = spread / spread.sum() * (1.0 - conf)
            posts.append(Posterior(f"a{i:05d}", tuple(map(float, probs))))
        policy = FilterPolicy(threshold=0.3, per_class_cap=10_000)
        kept, _ = filter(posts, policy)
        manifest = select_top(kept, policy)
        anger = [r for r in manifest if r.label is ClassLabel.ANGER]
        assert len(anger) == 10_000
        selected_ids = {r.image_id for r in anger}
        min_selected = min(r.confidence for r in anger)
        max_rejected = max(
            (k.confidence for k in kept
             if k.label is ClassLabel.ANGER and k.image_id not in selected_ids),
            default=0.0,
        )
        assert min_selected >= max_rejected

    def test_cap_one_global_max(self):
        posts = random_posteriors(500, seed=13)
        policy = FilterPolicy(threshold=0.2, per_class_cap=1)
        kept, _ = filter(posts, policy)
        manifest = select_top(kept, policy)
        by_class = {}
        for item in kept:
            by_class.setdefault(item.label, []).append(item)
        for rec in manifest:
            assert rec.confidence == max(k.confidence for k in by_class[rec.label])

    def test_pool_resolution(self):
        posts = [Posterior("img1", (0.9, 0.02, 0.02, 0.02, 0.02, 0.01, 0.01))]
        policy = FilterPolicy()
        kept, _ = filter(posts, policy)
        pool = {
            "img1": ImageRecord("img1", "deep/img1.png", "digiface", ClassLabel.SADNESS)
        }
        manifest = select_top(kept, policy, pool=pool)
        rec = manifest[0]
        assert rec.path == "deep/img1.png"
        assert rec.source == "digiface"
        assert rec.label is ClassLabel.ANGER  # label comes from the posterior
        with pytest.raises(KeyError):
            select_top(kept, policy, pool={})

    def test_deterministic_output(self, tmp_path):
        from ferforge.core import write_manifest

        posts = random_posteriors(2000, seed=17)
        policy = FilterPolicy(threshold=0.25, per_class_cap=100)
        kept, _ = filter(posts, policy)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_manifest(select_top(kept, policy), p1)
        write_manifest(select_top(kept, policy), p2)
        assert p1.read_bytes() == p2.read_bytes()


@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=10**6),
            st.floats(min_value=0.01, max_value=1.0, allow_nan=False),
        ),
        min_size=1,
        max_size=200,
    ),
    st.floats(min_value=0.05, max_value=0.95),
    st.integers(min_value=1, max_value=30),
)
@settings(max_examples=100, deadline=None)
def test_pipeline_laws_property(raw, threshold, cap):
    """Membership, cap, and order laws against a brute-force re-scan."""
    rng = np.random.default_rng(abs(hash((len(raw), threshold, cap))) % 2**32)
    posts = []
    for i, (ident, peak) in enumerate(raw):
        probs = rng.dirichlet(np.ones(7)) * (1.0 - peak)
        cls = ident % 7
        probs[cls] += peak
        posts.append(Posterior(f"id{ident}_{i}", tuple(map(float, probs))))
    policy = FilterPolicy(threshold=threshold, per_class_cap=cap)
    kept, discarded = filter(posts, policy)

    # Membership law.
    for post in posts:
        in_kept = any(k.image_id == post.image_id for k in kept)
        assert in_kept == (max(post.probs) >= threshold)
    assert discarded == len(posts) - len(kept)

    # Cap law per class.
    manifest = select_top(kept, policy)
    passing = {}
    for item in kept:
        passing.setdefault(item.label, []).append(item)
    for label in ClassLabel:
        selected = [r for r in manifest if r.label == label]
        assert len(selected) == min(cap, len(passing.get(label, [])))
