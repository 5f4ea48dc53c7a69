"""Acceptance criteria, one pass/fail line each.

Run under pytest (lines appear in the terminal summary) or directly:
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import contextlib
import io
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latentprobe import EmbeddingSet, normalize  # noqa: E402
from latentprobe import ann  # noqa: E402
from latentprobe.cli import main as cli  # noqa: E402
from latentprobe.clustering import dbscan  # noqa: E402
from latentprobe.geometry import anisotropy  # noqa: E402
from latentprobe.knn import exact_knn  # noqa: E402
from latentprobe.purity import local_purity_curve  # noqa: E402
from latentprobe.report import fixture_tables, strip_timings  # noqa: E402
from latentprobe.retrieval import METRICS, average_precision_at_k, evaluate_index, knn_classify_accuracy  # noqa: E402
from latentprobe.synth import SynthSpec, generate  # noqa: E402
from oracles import dbscan_reference, same_partition  # noqa: E402

RESULTS: list[str] = []


def record(label: str, checks: dict[str, bool], detail: str) -> None:
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    if failed:
        line += f"  (failed: {', '.join(failed)})"
    RESULTS.append(line)
    assert ok, line


def test_c1_bucket_correlations():
    t0 = time.perf_counter()
    t = fixture_tables("t_approx")["properties_vs_lsh16"]
    elapsed = time.perf_counter() - t0
    ub = t.cell("anisotropy", "unique_buckets")
    en = t.cell("anisotropy", "entropy_bits")
    mb = t.cell("anisotropy", "max_bucket_pct")
    record("C1 anisotropy vs 16-bit bucket stats", {
        "unique rho": abs(ub.rho + 0.90) <= 0.02,
        "unique p": abs(ub.p_value - 0.001) <= 0.0005,
        "entropy rho": abs(en.rho + 0.90) <= 0.02,
        "max-bucket rho": abs(mb.rho - 0.67) <= 0.05,
        "runtime": elapsed < 1.0,
    }, f"unique rho={ub.rho:.3f} p={ub.p_value:.4f}, entropy rho={en.rho:.3f}, "
       f"max-bucket rho={mb.rho:.3f}, {elapsed * 1e3:.1f} ms")


def test_c2_retrieval_correlations():
    t0 = time.perf_counter()
    t = fixture_tables("t_approx")["properties_vs_retrieval"]
    elapsed = time.perf_counter() - t0
    a = t.cell("skewness", "lsh.p_at_10").rho
    b = t.cell("skewness", "ivf.p_at_10").rho
    c = t.cell("max_hub", "lsh.p_at_10").rho
    record("C2 geometry vs retrieval spot cells", {
        "skew/lsh": abs(a + 0.80) <= 0.05,
        "skew/ivf": abs(b + 0.67) <= 0.07,
        "hub/lsh": abs(c + 0.74) <= 0.05,
        "runtime": elapsed < 1.0,
    }, f"skew~LSH P@10={a:.3f}, skew~IVF P@10={b:.3f}, hub~LSH P@10={c:.3f}, {elapsed * 1e3:.1f} ms")


def test_c3_entropy_ceiling():
    t0 = time.perf_counter()
    iso = []
    worst = 0.0
    for s in range(5):
        e = generate(SynthSpec("isotropic_gaussian", 50_000, 128, seed=s))
        h = ann.lsh_bucket_stats(ann.lsh_build(e, ann.LshConfig(16, seed=s))).entropy_bits
        iso.append(h)
        worst = max(worst, h)
    # a few very different 50k corpora, including a near-uniform random code assignment
    others = [
        generate(SynthSpec("cone", 50_000, 16, seed=0, kappa=8.0)),
        generate(SynthSpec("labeled_mixture", 50_000, 32, seed=0, n_classes=20)),
        generate(SynthSpec("isotropic_gaussian", 50_000, 16, seed=9)),
    ]
    for e in others:
        worst = max(worst, ann.lsh_bucket_stats(ann.lsh_build(e, ann.LshConfig(16, seed=1))).entropy_bits)
    uniform = np.random.default_rng(0).integers(0, 256, (50_000, 2), dtype=np.uint8)
    worst = max(worst, ann.bucket_stats_from_codes(uniform, 16).entropy_bits)
    elapsed = time.perf_counter() - t0
    record("C3 LSH entropy ceiling at N=50k, 16 bits", {
        "ceiling": worst <= 15.61,
        "isotropic mean": np.mean(iso) >= 14.5,
        "runtime": elapsed < 30.0,
    }, f"max entropy={worst:.4f} (log2 N={np.log2(50_000):.4f}), isotropic d=128 mean={np.mean(iso):.3f}, {elapsed:.1f} s")


def test_c4_oracle_equivalence():
    t0 = time.perf_counter()
    checks = {}
    # (a) IVF with one list against the exact table, 1,000 queries
    e = generate(SynthSpec("labeled_mixture", 3000, 32, seed=0, n_classes=10, separation=4.0))
    idx = ann.ivf_build(e, ann.IvfConfig(nlist=1))
    table = exact_knn(e, 10, exclude_self=False)
    same = all(
        np.array_equal(ids, table.neighbor_ids[i]) and d.tobytes() == table.distances[i].tobytes()
        for i in range(1000)
        for ids, d in [idx.search(e.vectors[i], 10)]
    )
    checks["a ivf"] = same
    # (b) small HNSW graphs are exact
    recalls = []
    for s in range(10):
        n = 12 + 2 * s
        e = normalize(generate(SynthSpec("isotropic_gaussian", n, 16, seed=s)), "l2")
        h = ann.hnsw_build(e, ann.HnswConfig(m=16, seed=s))
        q = normalize(generate(SynthSpec("isotropic_gaussian", 20, 16, seed=100 + s)), "l2").vectors
        flat = ann.flat_build(e, "ip")
        kk = min(10, n)
        for v in q:
            recalls.append(len(set(h.search(v, kk)[0]) & set(flat.search(v, kk)[0])) / kk)
    checks["b hnsw"] = min(recalls) == 1.0
    # (c) LSH ranking vs a popcount scan over packed XOR
    e = generate(SynthSpec("isotropic_gaussian", 2000, 32, seed=1))
    lsh = ann.lsh_build(e, ann.LshConfig(128, seed=1))
    rng = np.random.default_rng(5)
    ok_c = True
    for q in rng.standard_normal((200, 32)):
        packed = np.packbits((q @ lsh.planes.T > 0).astype(np.uint8), bitorder="little")
        ham = ann.lsh.popcount_rows(np.bitwise_xor(lsh.codes, packed))
        want = np.lexsort((np.arange(2000), ham))[:50]
        ids, hd = lsh.search(q, 50)
        ok_c &= np.array_equal(ids, want) and np.array_equal(hd, ham[want])
    checks["c lsh"] = bool(ok_c)
    # (d) DBSCAN against the textbook reference, both metrics
    e = normalize(generate(SynthSpec("labeled_mixture", 2000, 4, seed=2, n_classes=4, cluster_std=1.0, separation=6.0)), "hypersphere")
    d1 = dbscan(e, 0.08, 5, "euclidean")
    d2 = dbscan(e, 0.01, 5, "cosine")
    checks["d dbscan"] = (
        same_partition(d1.assignments, dbscan_reference(e.vectors, 0.08, 5, "euclidean"))
        and same_partition(d2.assignments, dbscan_reference(e.vectors, 0.01, 5, "cosine"))
        and d1.n_clusters > 1 and d1.n_noise > 0
    )
    elapsed = time.perf_counter() - t0
    checks["runtime"] = elapsed < 60.0
    record("C4 oracle equivalence", checks,
           f"ivf==exact on 1000 queries: {checks['a ivf']}, small-HNSW min recall={min(recalls):.3f}, "
           f"lsh==scan: {checks['c lsh']}, dbscan==reference ({d1.n_clusters} clusters, {d1.n_noise} noise): "
           f"{checks['d dbscan']}, {elapsed:.1f} s")


def test_c5_anisotropy_calibration():
    iso = anisotropy(generate(SynthSpec("isotropic_gaussian", 10_000, 16, seed=0)))
    an, ent = [], []
    for kappa in (0.0, 2.0, 8.0):
        a_s, h_s = [], []
        for s in range(5):
            e = generate(SynthSpec("cone", 10_000, 16, seed=s, kappa=kappa))
            a_s.append(anisotropy(e))
            h_s.append(ann.lsh_bucket_stats(ann.lsh_build(e, ann.LshConfig(16, seed=s))).entropy_bits)
        an.append(float(np.mean(a_s)))
        ent.append(float(np.mean(h_s)))
    record("C5 anisotropy calibration", {
        "isotropic": abs(iso - 0.0625) <= 0.01,
        "anisotropy increasing": an[0] < an[1] < an[2],
        "entropy decreasing": ent[0] > ent[1] > ent[2],
    }, f"isotropic 16-D={iso:.4f}; cone kappa 0/2/8 anisotropy={[round(v, 5) for v in an]}, "
       f"entropy={[round(v, 3) for v in ent]}")


def _enumerate(ranked, rel, k):
    top = ranked[:k]
    hits = [r in rel for r in top]
    ap, seen = Fraction(0), 0
    for i, h in enumerate(hits, 1):
        if h:
            seen += 1
            ap += Fraction(seen, i)
    rr = next((Fraction(1, i) for i, h in enumerate(hits, 1) if h), Fraction(0))
    return [float(Fraction(sum(hits), k)), float(Fraction(sum(hits), len(rel))), float(ap / min(len(rel), k)), float(rr)]


def test_c6_metric_hand_checks():
    e = EmbeddingSet(np.arange(30, dtype=float)[:, None], np.arange(30) % 3, name="line30")
    rep = evaluate_index(e, ann.flat_build(e), k=10, keep_per_query=True)
    rows = list(zip(*(rep.per_query[m] for m in METRICS)))
    mism = 0
    for i in range(30):
        ranked = sorted((j for j in range(30) if j != i), key=lambda j: (abs(j - i), j))
        rel = {j for j in range(30) if j != i and j % 3 == i % 3}
        mism += list(rows[i]) != _enumerate(ranked, rel, 10)
    hand0 = list(rows[0]) == [0.3, 1 / 3, 1 / 9, 1 / 3]
    ap = average_precision_at_k(["r1", "x", "r3"] + [f"x{i}" for i in range(7)], {"r1", "r3"} | {f"o{i}" for i in range(20)}, 10)
    record("C6 metric hand checks", {
        "per-query": mism == 0,
        "query 0": hand0,
        "AP example": abs(ap - 0.1667) <= 1e-4 and abs(ap - (1 + 2 / 3) / 10) <= 1e-9,
    }, f"30-point fixture mismatches={mism}, query 0 (P,R,AP,RR)={[round(v, 4) for v in rows[0]]}, AP(ranks 1,3)={ap:.10f}")


def test_c7_purity():
    sep = generate(SynthSpec("labeled_mixture", 300, 8, seed=0, n_classes=5, cluster_std=0.5, separation=25))
    pure = local_purity_curve(sep, 50).purity
    curves = []
    for s in range(5):
        g = generate(SynthSpec("isotropic_gaussian", 1000, 8, seed=s))
        lab = np.random.default_rng(1000 + s).permutation(np.arange(1000) % 2)
        curves.append(local_purity_curve(EmbeddingSet(g.vectors, lab), 50).purity)
    null_dev = float(np.max(np.abs(np.mean(curves, axis=0) - 0.5)))
    rng = np.random.default_rng(3)
    r = EmbeddingSet(rng.standard_normal((400, 6)), rng.integers(0, 5, 400))
    p1 = float(local_purity_curve(r, 10).purity[0])
    acc1 = knn_classify_accuracy(r, 1)[0]
    record("C7 purity contracts", {
        "separated": bool(np.all(pure == 1.0)),
        "null": null_dev <= 0.05,
        "purity(1)==1-NN": p1 == acc1,
    }, f"separated min purity={pure.min():.3f} (k<=50, class size 60), null max |dev|={null_dev:.4f}, "
       f"purity(1)={p1!r} 1-NN acc={acc1!r}")


def test_c8_bit_sweep():
    bits = (16, 64, 256, 1024, 4096)
    curves = []
    for s in range(5):
        e = generate(SynthSpec("labeled_mixture", 1000, 64, seed=s, n_classes=10, cluster_std=1.0, separation=6.0))
        curves.append([evaluate_index(e, ann.lsh_build(e, ann.LshConfig(b, seed=s)), 10).p_at_k[0] for b in bits])
    curves = np.array(curves)
    worst_drop = float(np.max(curves[:, :-1] - curves[:, 1:]))
    record("C8 LSH P@10 vs nbits", {
        "non-decreasing": worst_drop <= 0.02,
        "nontrivial": curves[:, 0].mean() < 0.5 < curves[:, -1].mean(),
    }, f"mean P@10 {dict(zip(bits, np.round(curves.mean(axis=0), 3).tolist()))}, worst step drop={worst_drop:.4f}")


def _run_all(tmp: Path, tag: str) -> dict[str, bytes]:
    with contextlib.redirect_stdout(io.StringIO()):
        return _run_all_quiet(tmp, tag)


def _run_all_quiet(tmp: Path, tag: str) -> dict[str, bytes]:
    d = tmp / tag
    d.mkdir()
    out = {}
    assert cli(["gen", "--kind", "labeled_mixture", "--n", "400", "--d", "16", "--n-classes", "4",
                "--separation", "5", "--seed", "7", "--out", str(d / "c")]) == 0
    corpus = ["--data", str(d / "c.f32"), "--labels", str(d / "c.labels"), "--seed", "7"]
    assert cli(["analyze", *corpus, "--lsh-bits", "16,64", "--out", str(d / "r.json")]) == 0
    for ix in ("exact", "ivf", "lsh"):
        assert cli(["bench", *corpus, "--index", ix, "--nlist", "8", "--out", str(d / "r.json")]) == 0
    assert cli(["bench", *corpus, "--index", "hnsw", "--normalize", "l2", "--out", str(d / "r.json")]) == 0
    assert cli(["lsh-sweep", *corpus, "--bits", "16,256", "--out", str(d / "sweep.csv")]) == 0
    assert cli(["purity", *corpus, "--k-max", "30", "--out", str(d / "purity.csv")]) == 0
    assert cli(["cluster", *corpus, "--normalize", "l2", "--min-pts", "3,5", "--out", str(d / "cl.json"),
                "--assignments", str(d / "asg.csv")]) == 0
    assert cli(["viz", *corpus, "--out", str(d / "map")]) == 0
    assert cli(["correlate", "--paper-fixture", "--out", str(d / "corr.json")]) == 0
    for p in sorted(d.iterdir()):
        if p.name == "r.json":
            doc = strip_timings(json.loads(p.read_text()))
            out[p.name] = json.dumps(doc, sort_keys=True).encode()
        else:
            out[p.name] = p.read_bytes()
    return out


def test_c9_determinism(tmp_path):
    a = _run_all(tmp_path, "a")
    b = _run_all(tmp_path, "b")
    diff = sorted(k for k in a if a[k] != b.get(k))
    record("C9 CLI determinism", {
        "same files": set(a) == set(b),
        "byte-identical": not diff,
    }, f"{len(a)} artifacts compared, differing={diff or 'none'}")


if __name__ == "__main__":
    import tempfile

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    failures = 0
    for fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp))
            else:
                fn()
        except AssertionError:
            failures += 1
        except Exception as exc:  # pragma: no cover
            failures += 1
            RESULTS.append(f"[FAIL] {fn.__name__}: {type(exc).__name__}: {exc}")
    print("\n".join(RESULTS))
    sys.exit(1 if failures else 0)
