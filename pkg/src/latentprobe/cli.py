"""Command line entry point: ``latentprobe <verb> [flags]``.

Exit codes: 0 success, 2 input error, 3 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

from latentprobe import ann
from latentprobe.clustering import cluster_corpus
from latentprobe.core import EmbeddingSet, NormalizationMode, file_hash, is_unit_norm, load_embeddings, normalize, save_embeddings
from latentprobe.errors import ComputationError, InputError, LatentProbeError
from latentprobe.geometry import DEFAULT_HUB_K, geometry_report
from latentprobe.purity import local_purity_curve
from latentprobe.report import (
    csv_tables,
    fixture_tables,
    new_report,
    read_report,
    reports_table,
    write_report,
)
from latentprobe.retrieval import evaluate_index
from latentprobe.synth import SynthSpec, generate

log = logging.getLogger("latentprobe")

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3
DEFAULT_SWEEP_BITS = (16, 64, 256, 1024, 4096)
# cosine and Euclidean DBSCAN radii used for the default clustering section
DEFAULT_CLUSTER_RUNS = (("cosine_distance", 0.1), ("euclidean", 0.4))
NORM_CHOICES = {"none": NormalizationMode.NONE, "l2": NormalizationMode.L2_ROWS, "hypersphere": NormalizationMode.UNIT_HYPERSPHERE_SCALE}


class SectionError(LatentProbeError):
    def __init__(self, section: str, exc: Exception):
        super().__init__(f"[{section}] {exc}")
        self.section = section
        self.cause = exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ----------------------------------------------------------------- parsers

def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    p.add_argument("--normalize", choices=sorted(NORM_CHOICES), default="none")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exclude-self", dest="exclude_self", action="store_true", default=True,
                   help="drop each query from its own result list (default)")
    g.add_argument("--include-self", dest="exclude_self", action="store_false")
    p.add_argument("--out", type=Path, help="output path (report, CSV or file prefix depending on the verb)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _corpus_flags(multi: bool = False) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    action = "append" if multi else "store"
    p.add_argument("--data", type=Path, required=True, action=action, help="embedding file")
    p.add_argument("--labels", type=Path, action=action, help="labels file, one integer per line")
    p.add_argument("--format", choices=("raw_f32", "csv"), default="raw_f32")
    p.add_argument("--name", help="corpus name (defaults to the file stem)")
    return p


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="latentprobe", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="verb", required=True)
    glob = _global_flags()
    corpus = _corpus_flags()

    p = sub.add_parser("gen", parents=[glob], help="write a synthetic corpus in raw format")
    p.add_argument("--kind", choices=("isotropic_gaussian", "cone", "labeled_mixture"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--n-classes", type=int, default=1)
    p.add_argument("--cluster-std", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=10.0)

    sub.add_parser("ingest", parents=[glob, corpus], help="validate a corpus and rewrite it in raw format")

    p = sub.add_parser("analyze", parents=[glob, corpus], help="geometry, LSH buckets, purity and clustering report")
    p.add_argument("--hub-k", type=int, default=DEFAULT_HUB_K)
    p.add_argument("--lsh-bits", type=_int_list, default=[16])
    p.add_argument("--lsh-center", action="store_true")
    p.add_argument("--purity-k", type=int, default=50)
    p.add_argument("--purity-metric", choices=("euclidean", "cosine"), default="euclidean")
    p.add_argument("--min-pts", type=int, default=5)
    p.add_argument("--cosine-eps", type=float, default=DEFAULT_CLUSTER_RUNS[0][1])
    p.add_argument("--euclidean-eps", type=float, default=DEFAULT_CLUSTER_RUNS[1][1])
    p.add_argument("--noise-mode", choices=("shared", "exclude"), default="shared")
    p.add_argument("--skip", type=lambda s: s.split(","), default=[], help="sections to skip: geometry,lsh,purity,clustering")

    p = sub.add_parser("bench", parents=[glob, corpus], help="retrieval metrics for one index")
    p.add_argument("--index", choices=("exact", "ivf", "hnsw", "lsh"), required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--nlist", type=int, default=100)
    p.add_argument("--nprobe", type=int, default=1)
    p.add_argument("--kmeans-iters", type=int, default=25)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=40)
    p.add_argument("--ef-search", type=int, default=16)
    p.add_argument("--nbits", type=int, default=128)
    p.add_argument("--lsh-center", action="store_true")
    p.add_argument("--metric", choices=("euclidean", "cosine", "inner_product"), default="euclidean",
                   help="metric of the exact index")
    p.add_argument("--save-index", type=Path)
    p.add_argument("--load-index", type=Path)

    p = sub.add_parser("lsh-sweep", parents=[glob, _corpus_flags(multi=True)], help="LSH P@K across bit counts")
    p.add_argument("--bits", type=_int_list, default=list(DEFAULT_SWEEP_BITS))
    p.add_argument("--k", type=int, default=10)

    p = sub.add_parser("cluster", parents=[glob, corpus], help="DBSCAN with NMI/ARI against labels")
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=_int_list, default=[5], help="one or more min_pts values (sensitivity sweep)")
    p.add_argument("--noise-mode", choices=("shared", "exclude"), default="shared")
    p.add_argument("--assignments", type=Path, help="write per-item cluster ids to this CSV")

    p = sub.add_parser("purity", parents=[glob, corpus], help="local purity curve as CSV")
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")

    p = sub.add_parser("correlate", parents=[glob], help="Spearman tables between geometry and retrieval")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--reference-fixture", "--paper-fixture", dest="paper_fixture", action="store_true",
                     help="use the shipped printed reference tables")
    src.add_argument("--reports", type=Path, nargs="+")
    src.add_argument("--properties-csv", type=Path)
    p.add_argument("--metrics-csv", type=Path)
    p.add_argument("--lsh-bits", type=int, default=16)
    p.add_argument("--method", choices=("t_approx", "exact_permutation"), default="t_approx")

    p = sub.add_parser("viz", parents=[glob, corpus], help="random 3-D projection, Mollweide map, SVG + CSV")
    p.add_argument("--highlight", type=int, default=8)
    p.add_argument("--center", action="store_true")
    return top


# ------------------------------------------------------------------ helpers

def _load(args) -> tuple[EmbeddingSet, dict]:
    e = load_embeddings(args.data, args.labels, args.format, name=args.name)
    info = {
        "name": e.name,
        "n": e.n,
        "d": e.d,
        "n_classes": int(len(set(e.labels.tolist()))),
        "hash": file_hash(args.data, args.labels),
        "data_file": Path(args.data).name,
        "labels_file": Path(args.labels).name if args.labels else None,
        "format": args.format,
    }
    return e, info


def _normalized(e: EmbeddingSet, args) -> EmbeddingSet:
    return normalize(e, NORM_CHOICES[args.normalize])


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _section(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except LatentProbeError as exc:
        raise SectionError(name, exc) from exc


# -------------------------------------------------------------------- verbs

def cmd_gen(args) -> int:
    spec = SynthSpec(args.kind, args.n, args.d, seed=args.seed, kappa=args.kappa, n_classes=args.n_classes,
                     cluster_std=args.cluster_std, separation=args.separation)
    e = generate(spec)
    if args.out is None:
        raise InputError("gen needs --out PREFIX")
    data, labels = save_embeddings(e, args.out.with_suffix(".f32"), args.out.with_suffix(".labels"))
    print(json.dumps({"data": str(data), "labels": str(labels), "n": e.n, "d": e.d, "synth": spec.to_dict()}, sort_keys=True))
    return EXIT_OK


def cmd_ingest(args) -> int:
    e, info = _load(args)
    e = _normalized(e, args)
    if args.out is not None:
        save_embeddings(e, args.out.with_suffix(".f32"), args.out.with_suffix(".labels"))
    print(json.dumps({**info, "normalization": NORM_CHOICES[args.normalize].value}, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args) -> int:
    e, info = _load(args)
    e = _normalized(e, args)
    rep = new_report(info, NORM_CHOICES[args.normalize].value, args.seed)
    skip = set(args.skip)
    timings = rep["timings"]

    if "geometry" not in skip:
        t0 = time.perf_counter()
        rep["geometry"] = _section("geometry", geometry_report, e, hub_k=args.hub_k, seed=args.seed).to_dict()
        timings["geometry_s"] = time.perf_counter() - t0
    if "lsh" not in skip:
        t0 = time.perf_counter()
        for bits in args.lsh_bits:
            idx = _section("lsh", ann.lsh_build, e, ann.LshConfig(nbits=bits, seed=args.seed, center=args.lsh_center))
            stats = ann.lsh_bucket_stats(idx).to_dict()
            rep["lsh_bucket_stats"].append({**stats, "seed": args.seed, "center": args.lsh_center})
        timings["lsh_s"] = time.perf_counter() - t0
    if "purity" not in skip:
        t0 = time.perf_counter()
        k_max = min(args.purity_k, e.n - 1)
        rep["purity"] = _section("purity", local_purity_curve, e, k_max, args.purity_metric).to_dict()
        timings["purity_s"] = time.perf_counter() - t0
    if "clustering" not in skip:
        t0 = time.perf_counter()
        runs = (("cosine_distance", args.cosine_eps, e), ("euclidean", args.euclidean_eps, None))
        for metric, eps, corpus in runs:
            if corpus is None:
                # Euclidean radii only compare across corpora once the longest row has norm 1
                corpus = _section("clustering", normalize, e, NormalizationMode.UNIT_HYPERSPHERE_SCALE)
            res = _section("clustering", cluster_corpus, corpus, eps, args.min_pts, metric, args.noise_mode)
            norm = corpus.meta.get("normalization", rep["normalization"])
            rep["clustering"].append({**res.to_dict(), "normalization": norm})
        timings["clustering_s"] = time.perf_counter() - t0

    if args.out is None:
        sys.stdout.write(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    else:
        write_report(rep, args.out)
    return EXIT_OK


def _build_index(args, e: EmbeddingSet):
    if args.load_index is not None:
        idx = ann.load_index(args.load_index)
        if idx.kind != args.index or idx.size != e.n:
            raise InputError(f"{args.load_index}: holds a {idx.kind} index over {idx.size} items, expected {args.index} over {e.n}")
        return idx
    if args.index == "exact":
        return ann.flat_build(e, args.metric)
    if args.index == "ivf":
        return ann.ivf_build(e, ann.IvfConfig(args.nlist, args.nprobe, args.kmeans_iters, args.seed))
    if args.index == "hnsw":
        if not is_unit_norm(e.vectors, ann.hnsw.UNIT_TOL):
            raise InputError("HNSW uses inner product over unit vectors: rerun with --normalize l2")
        return ann.hnsw_build(e, ann.HnswConfig(args.m, args.ef_construction, args.ef_search, args.seed))
    return ann.lsh_build(e, ann.LshConfig(args.nbits, args.seed, args.lsh_center))


def cmd_bench(args) -> int:
    e, info = _load(args)
    e = _normalized(e, args)
    t0 = time.perf_counter()
    idx = _build_index(args, e)
    build_s = time.perf_counter() - t0
    if args.save_index is not None:
        ann.save_index(idx, args.save_index)
    res = evaluate_index(e, idx, args.k, args.exclude_self)
    entry = res.to_dict()
    entry["normalization"] = NORM_CHOICES[args.normalize].value
    entry["timings"]["build_s"] = build_s
    if args.index == "hnsw":
        entry["config"]["effective_ef_search"] = max(args.ef_search, 1)

    if args.out is not None:
        rep = read_report(args.out) if args.out.exists() else new_report(info, entry["normalization"], args.seed)
        if rep["corpus"]["hash"] != info["hash"]:
            raise InputError(f"{args.out} belongs to a different corpus (hash mismatch)")
        rep["retrieval"].append(entry)
        write_report(rep, args.out)
    head = f"{'index':<6} " + " ".join(f"{h:>8}" for h in (f"P@{args.k}", f"R@{args.k}", f"mAP@{args.k}", "MRR"))
    print(head)
    print(res.render_row())
    return EXIT_OK


def cmd_lsh_sweep(args) -> int:
    labels = args.labels or []
    if len(labels) not in (0, len(args.data)):
        raise InputError("give one --labels per --data")
    columns, names = [], []
    for j, data in enumerate(args.data):
        lab = labels[j] if labels else None
        e = _normalized(load_embeddings(data, lab, args.format), args)
        names.append(e.name if e.name not in names else f"{e.name}_{j}")
        col = []
        for bits in args.bits:
            idx = ann.lsh_build(e, ann.LshConfig(bits, args.seed))
            col.append(evaluate_index(e, idx, args.k, args.exclude_self).p_at_k[0])
        columns.append(col)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nbits", *(f"{n}_P@{args.k}" for n in names)])
    for i, bits in enumerate(args.bits):
        w.writerow([bits, *(repr(float(c[i])) for c in columns)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_cluster(args) -> int:
    e, info = _load(args)
    e = _normalized(e, args)
    metric = "cosine_distance" if args.metric == "cosine" else "euclidean"
    eps = args.eps if args.eps is not None else dict(DEFAULT_CLUSTER_RUNS)[metric]
    results = [cluster_corpus(e, eps, mp, metric, args.noise_mode) for mp in args.min_pts]
    doc = {"corpus": info, "normalization": NORM_CHOICES[args.normalize].value,
           "results": [r.to_dict() for r in results]}
    if args.assignments is not None:
        with open(args.assignments, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", *(f"min_pts_{r.min_pts}" for r in results)])
            for i in range(e.n):
                w.writerow([int(e.ids[i]), *(int(r.assignments[i]) for r in results)])
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_purity(args) -> int:
    e, _ = _load(args)
    e = _normalized(e, args)
    curve = local_purity_curve(e, args.k_max, args.metric)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "purity"])
    for k, p in zip(curve.k_values, curve.purity):
        w.writerow([int(k), repr(float(p))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_correlate(args) -> int:
    if args.paper_fixture:
        tables = fixture_tables(args.method)
    elif args.reports:
        tables = {"reports": reports_table([read_report(p) for p in args.reports], args.lsh_bits, args.method)}
    else:
        if args.metrics_csv is None:
            raise InputError("--properties-csv needs --metrics-csv")
        tables = {"csv": csv_tables(args.properties_csv, args.metrics_csv, args.method)}
    for name, t in tables.items():
        print(f"# {name}")
        print(t.render())
    if args.out is not None:
        args.out.write_text(json.dumps({k: t.to_dict() for k, t in tables.items()}, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_viz(args) -> int:
    from latentprobe.viz import latent_map

    e, _ = _load(args)
    e = _normalized(e, args)
    svg, table, chosen = latent_map(e, seed=args.seed, n_highlight=args.highlight, center=args.center)
    prefix = args.out if args.out is not None else Path(e.name)
    prefix.with_suffix(".svg").write_text(svg)
    prefix.with_suffix(".csv").write_text(table)
    print(json.dumps({"svg": str(prefix.with_suffix(".svg")), "csv": str(prefix.with_suffix(".csv")),
                      "highlighted_classes": chosen}, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "ingest": cmd_ingest,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
    "lsh-sweep": cmd_lsh_sweep,
    "cluster": cmd_cluster,
    "purity": cmd_purity,
    "correlate": cmd_correlate,
    "viz": cmd_viz,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except SectionError as exc:
        print(f"latentprobe {args.verb}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE if isinstance(exc.cause, ComputationError) else EXIT_INPUT
    except ComputationError as exc:
        print(f"latentprobe {args.verb}: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (InputError, FileNotFoundError) as exc:
        print(f"latentprobe {args.verb}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
