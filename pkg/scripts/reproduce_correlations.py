"""Recompute both Spearman tables from the shipped reference tables and diff against the printed cells."""

import argparse

from latentprobe.report import fixture_tables, reference_tables


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--method", choices=("t_approx", "exact_permutation"), default="t_approx")
    ap.add_argument("--threshold", type=float, default=0.05, help="flag cells whose rho differs by more than this")
    args = ap.parse_args(argv)

    printed = reference_tables()["imagenet"]["printed_correlations"]
    for name, table in fixture_tables(args.method).items():
        print(f"# {name}")
        print(table.render())
        for key, cell in printed[name].items():
            prop, metric = key.split("|")
            got = table.cell(prop, metric)
            if abs(got.rho - cell["rho"]) > args.threshold:
                print(f"  differs: {key}: recomputed rho={got.rho:+.3f} printed {cell['rho']:+.2f}")
        print()


if __name__ == "__main__":
    main()
