import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentprobe import EmbeddingSet, InputError, normalize
from latentprobe import ann
from latentprobe.ann.ivf import assign, kmeans
from latentprobe.knn import exact_knn
from latentprobe.synth import SynthSpec, generate
from oracles import entropy_bits, hamming_scan, ip_scan


def _e(x, labels=None):
    x = np.asarray(x, dtype=float)
    return EmbeddingSet(x, np.zeros(len(x), dtype=int) if labels is None else labels)


def _unit(rng, n, d):
    x = rng.standard_normal((n, d))
    return _e(x / np.linalg.norm(x, axis=1, keepdims=True))


def _blobs(rng, per=25):
    centers = np.array([[0, 0], [50, 0], [0, 50], [50, 50]], dtype=float)
    x = np.concatenate([c + rng.standard_normal((per, 2)) for c in centers])
    return _e(x, np.repeat(np.arange(4), per))


# ---------------------------------------------------------------- IVF

def test_ivf_single_list_holds_everything(rng):
    e = _e(rng.standard_normal((40, 3)))
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=1))
    assert idx.lists[0].tolist() == list(range(40))


def test_ivf_blobs_one_list_per_blob(rng):
    e = _blobs(rng)
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=4, seed=1))
    groups = sorted(sorted(set(e.labels[lst].tolist())) for lst in idx.lists)
    assert groups == [[0], [1], [2], [3]]
    assert all(len(lst) == 25 for lst in idx.lists)
    # lists agree with a brute-force nearest-centroid assignment
    brute = np.argmin(((e.vectors[:, None, :] - idx.centroids[None]) ** 2).sum(-1), axis=1)
    assert np.array_equal(brute, idx.assignments)


def test_ivf_deterministic(rng):
    e = _e(rng.standard_normal((300, 4)))
    a = ann.ivf_build(e, ann.IvfConfig(nlist=8, seed=5))
    b = ann.ivf_build(e, ann.IvfConfig(nlist=8, seed=5))
    assert a.centroids.tobytes() == b.centroids.tobytes()
    assert all(np.array_equal(x, y) for x, y in zip(a.lists, b.lists))


def test_ivf_partition_property(rng):
    e = _e(rng.standard_normal((500, 5)))
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=17, seed=2))
    allm = np.sort(np.concatenate(idx.lists))
    assert np.array_equal(allm, np.arange(500))


def test_kmeans_no_empty_clusters():
    # many duplicates force empty clusters that must be re-seeded
    x = np.repeat(np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]]), [50, 3, 1], axis=0)
    x = x + 1e-6 * np.arange(len(x))[:, None]
    c, lab = kmeans(x, 6, 25, seed=0)
    assert np.bincount(lab, minlength=6).min() >= 1
    assert np.array_equal(lab, assign(x, c))


def test_ivf_nlist1_equals_exact(rng):
    e = _e(rng.standard_normal((300, 8)))
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=1))
    t = exact_knn(e, 10, exclude_self=False)
    for i in range(e.n):
        ids, d = idx.search(e.vectors[i], 10)
        assert np.array_equal(ids, t.neighbor_ids[i])
        assert d.tobytes() == t.distances[i].tobytes()


def test_ivf_self_first(rng):
    e = _e(rng.standard_normal((200, 6)))
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=10))
    for i in range(0, 200, 7):
        ids, d = idx.search(e.vectors[i], 1)
        assert ids[0] == i and d[0] == 0.0


def test_ivf_full_probe_recall():
    e = generate(SynthSpec("labeled_mixture", 1000, 16, seed=0, n_classes=10, separation=4.0))
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=20, nprobe=20))
    t = exact_knn(e, 10, exclude_self=False)
    hits = sum(len(set(idx.search(e.vectors[i], 10)[0]) & set(t.neighbor_ids[i])) for i in range(e.n))
    assert hits / (10 * e.n) == 1.0


def test_ivf_underfill_not_padded():
    x = np.array([[0.0], [0.1], [100.0], [100.1], [100.2]])
    idx = ann.ivf_build(_e(x), ann.IvfConfig(nlist=2, nprobe=1))
    ids, _ = idx.search(np.array([0.0]), 4)
    assert sorted(ids.tolist()) == [0, 1]


def test_ivf_bad_config(rng):
    with pytest.raises(InputError):
        ann.ivf_build(_e(rng.standard_normal((5, 2))), ann.IvfConfig(nlist=6))
    with pytest.raises(InputError):
        ann.IvfConfig(nlist=2, nprobe=3)


# ---------------------------------------------------------------- HNSW

def test_hnsw_single_node():
    idx = ann.hnsw_build(_e([[1.0, 0.0]]))
    ids, _ = idx.search(np.array([0.0, 1.0]), 5)
    assert ids.tolist() == [0]


def test_hnsw_small_graph_fully_connected_and_exact(rng):
    e = _unit(rng, 30, 12)
    idx = ann.hnsw_build(e, ann.HnswConfig(m=16))
    assert all(len(nb) == 29 for nb in idx.links[0].values())
    for i in range(30):
        q = rng.standard_normal(12)
        q /= np.linalg.norm(q)
        assert idx.search(q, 10)[0].tolist() == ip_scan(e.vectors, q, 10)


def test_hnsw_deterministic(rng):
    e = _unit(rng, 400, 8)
    a = ann.hnsw_build(e, ann.HnswConfig(seed=3))
    b = ann.hnsw_build(e, ann.HnswConfig(seed=3))
    assert a.edges() == b.edges()
    assert np.array_equal(a.levels, b.levels)


def test_hnsw_self_query_similarity_one(rng):
    e = _unit(rng, 500, 16)
    idx = ann.hnsw_build(e)
    for i in range(0, 500, 25):
        ids, s = idx.search(e.vectors[i], 10)
        assert ids[0] == i
        assert abs(s[0] - 1.0) <= 1e-6


def test_hnsw_degree_bounds(rng):
    e = _unit(rng, 1500, 8)
    idx = ann.hnsw_build(e, ann.HnswConfig(m=4, ef_construction=20))
    assert idx.degree_ok()
    assert max(len(nb) for nb in idx.links[0].values()) <= 8


def test_hnsw_ef_n_exhaustive(rng):
    e = _unit(rng, 200, 6)
    idx = ann.hnsw_build(e, ann.HnswConfig(m=4, ef_construction=20))
    for _ in range(20):
        q = rng.standard_normal(6)
        q /= np.linalg.norm(q)
        assert idx.search(q, 10, ef_search=200)[0].tolist() == ip_scan(e.vectors, q, 10)


def test_hnsw_rejects_unnormalized(rng):
    with pytest.raises(InputError, match="normalize"):
        ann.hnsw_build(_e(rng.standard_normal((10, 3)) * 3))


@pytest.mark.slow
def test_hnsw_recall_clustered_5000():
    recalls = []
    for seed in range(5):
        e = normalize(generate(SynthSpec("labeled_mixture", 5000, 32, seed=seed, n_classes=20, separation=4.0)), "l2")
        idx = ann.hnsw_build(e, ann.HnswConfig(seed=seed))
        t = exact_knn(e, 10, "ip", exclude_self=False)
        qs = np.random.default_rng(seed).choice(e.n, 300, replace=False)
        hits = sum(len(set(idx.search(e.vectors[i], 10)[0]) & set(t.neighbor_ids[i])) for i in qs)
        recalls.append(hits / (10 * len(qs)))
    assert np.mean(recalls) >= 0.8


# ---------------------------------------------------------------- LSH

def test_lsh_sign_symmetry(rng):
    x = rng.standard_normal((20, 7))
    idx = ann.lsh_build(_e(np.vstack([x, -x])), ann.LshConfig(nbits=37))
    b = idx.unpacked()
    assert np.array_equal(b[:20], ~b[20:])


def test_lsh_duplicates_same_code(rng):
    x = rng.standard_normal((5, 4))
    idx = ann.lsh_build(_e(np.vstack([x, x])), ann.LshConfig(nbits=64))
    assert np.array_equal(idx.codes[:5], idx.codes[5:])


def test_lsh_bit_balance():
    e = generate(SynthSpec("isotropic_gaussian", 1000, 32, seed=1))
    frac = ann.lsh_build(e, ann.LshConfig(nbits=16, seed=1)).unpacked().mean(axis=0)
    assert np.all(np.abs(frac - 0.5) <= 0.05)


def test_lsh_matches_popcount_scan(rng):
    e = _e(rng.standard_normal((150, 10)))
    idx = ann.lsh_build(e, ann.LshConfig(nbits=48, seed=4))
    bits = idx.unpacked().tolist()
    for _ in range(25):
        q = rng.standard_normal(10)
        qbits = ((q - idx.offset) @ idx.planes.T > 0).tolist()
        want_ids, want_h = hamming_scan(bits, qbits, 20)
        ids, h = idx.search(q, 20)
        assert ids.tolist() == want_ids
        assert h.tolist() == want_h
        # independent popcount over packed XOR
        packed_q = np.packbits(np.array(qbits, dtype=np.uint8), bitorder="little")
        pc = ann.lsh.popcount_rows(np.bitwise_xor(idx.codes, packed_q))
        assert h.tolist() == np.sort(pc, kind="stable")[:20].tolist()


def test_lsh_self_at_zero(rng):
    e = _e(rng.standard_normal((50, 5)))
    idx = ann.lsh_build(e, ann.LshConfig(nbits=32))
    for i in range(50):
        ids, h = idx.search(e.vectors[i], 3)
        assert h[0] == 0
        assert i in idx.search(e.vectors[i], 50)[0][idx.search(e.vectors[i], 50)[1] == 0]


def test_lsh_k_n_total_order(rng):
    e = _e(rng.standard_normal((60, 4)))
    idx = ann.lsh_build(e, ann.LshConfig(nbits=8))
    ids, h = idx.search(rng.standard_normal(4), 60)
    assert sorted(ids.tolist()) == list(range(60))
    keys = list(zip(h.tolist(), ids.tolist()))
    assert keys == sorted(keys)


def test_bucket_stats_identical_points():
    s = ann.lsh_bucket_stats(ann.lsh_build(_e(np.ones((10, 3))), ann.LshConfig(nbits=16)))
    assert (s.unique_buckets, s.entropy_bits, s.max_bucket_fraction) == (1, 0.0, 1.0)


def test_bucket_stats_uniform_four():
    codes = np.array([[0], [1], [2], [3]], dtype=np.uint8)
    s = ann.bucket_stats_from_codes(codes, 2)
    assert s.entropy_bits == pytest.approx(2.0, abs=1e-12)
    assert s.max_bucket_fraction == 0.25


def test_bucket_stats_against_dict_count(rng):
    e = _e(rng.standard_normal((3000, 8)))
    idx = ann.lsh_build(e, ann.LshConfig(nbits=10))
    counts = {}
    for row in idx.unpacked():
        key = tuple(row.tolist())
        counts[key] = counts.get(key, 0) + 1
    s = ann.lsh_bucket_stats(idx)
    assert s.unique_buckets == len(counts)
    assert s.entropy_bits == pytest.approx(entropy_bits(list(counts.values())), abs=1e-12)
    assert s.max_bucket_fraction == max(counts.values()) / 3000


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 300), st.integers(1, 24), st.booleans())
def test_entropy_ceiling(seed, n, nbits, center):
    x = np.random.default_rng(seed).standard_normal((n, 5))
    s = ann.lsh_bucket_stats(ann.lsh_build(_e(x), ann.LshConfig(nbits=nbits, seed=seed, center=center)))
    assert s.entropy_bits <= min(nbits, np.log2(n)) + 1e-9
    assert 0 < s.max_bucket_fraction <= 1


def test_cone_entropy_decreasing():
    means = []
    for kappa in (0.0, 2.0, 8.0):
        vals = []
        for s in range(5):
            e = generate(SynthSpec("cone", 5000, 16, seed=s, kappa=kappa))
            vals.append(ann.lsh_bucket_stats(ann.lsh_build(e, ann.LshConfig(nbits=16, seed=s))).entropy_bits)
        means.append(np.mean(vals))
    assert means[0] > means[1] > means[2]


# ------------------------------------------------------- all index kinds

@pytest.mark.parametrize("kind", ["exact", "ivf", "hnsw", "lsh"])
def test_serialization_round_trip(tmp_path, rng, kind):
    e = _unit(rng, 120, 6)
    build = {
        "exact": lambda: ann.flat_build(e, "cosine"),
        "ivf": lambda: ann.ivf_build(e, ann.IvfConfig(nlist=6, nprobe=2)),
        "hnsw": lambda: ann.hnsw_build(e, ann.HnswConfig(m=4)),
        "lsh": lambda: ann.lsh_build(e, ann.LshConfig(nbits=20, center=True)),
    }[kind]
    idx = build()
    p = tmp_path / f"{kind}.idx"
    ann.save_index(idx, p)
    back = ann.load_index(p)
    assert back.kind == kind and back.config_dict() == idx.config_dict()
    for name, arr in idx.arrays().items():
        got = back.arrays()[name]
        assert got.dtype == arr.dtype and got.tobytes() == arr.tobytes(), name
    q = e.vectors[3]
    a, b = idx.search(q, 7), back.search(q, 7)
    assert np.array_equal(a[0], b[0]) and a[1].tobytes() == b[1].tobytes()


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "x.idx"
    p.write_bytes(b"not an index")
    with pytest.raises(InputError):
        ann.load_index(p)


@pytest.mark.parametrize("kind", ["ivf", "hnsw", "lsh"])
def test_concurrent_search_equals_sequential(rng, kind):
    from concurrent.futures import ThreadPoolExecutor

    e = _unit(rng, 400, 8)
    idx = {"ivf": lambda: ann.ivf_build(e, ann.IvfConfig(nlist=8, nprobe=3)),
           "hnsw": lambda: ann.hnsw_build(e),
           "lsh": lambda: ann.lsh_build(e, ann.LshConfig(nbits=32))}[kind]()
    seq = [idx.search(e.vectors[i], 10)[0].tolist() for i in range(100)]
    with ThreadPoolExecutor(4) as pool:
        par = list(pool.map(lambda i: idx.search(e.vectors[i], 10)[0].tolist(), range(100)))
    assert seq == par
