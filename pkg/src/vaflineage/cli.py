"""Command-line driver: `run` (inference), `simulate`, `evaluate`, `serve`.

Exit codes: 0 success, 1 usage error, 2 input error, 3 no valid tree.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .calling import CallingConfig
from .clustering import ClusteringConfig
from .evaluate import MetricReport, compare_tree, presence_sensitivity, write_metrics_table
from .io import (
    InputError,
    parse_cluster_file,
    parse_snv_table,
    read_bundle,
    read_truth_file,
    write_bundle,
    write_dot,
    write_snv_table,
    write_summary,
    write_truth_file,
    summary_lines,
)
from .network import NetworkConfig
from .pipeline import ResultBundle, RunConfig, run_pipeline, snv_node_map, snv_profile_map
from .search import SearchConfig
from .simulate import NoiseConfig, SimulationConfig, generate_dataset, replicate_rng

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NO_TREE = 0, 1, 2, 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaflineage",
        description="Multi-sample cancer lineage inference from SSNV VAFs",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="reconstruct lineage trees from an SSNV table")
    run.add_argument("input", help="SSNV TSV (normal sample first)")
    run.add_argument("-maxVAFAbsent", type=float, default=0.005, dest="t_absent")
    run.add_argument("-minVAFPresent", type=float, default=0.005, dest="t_present")
    run.add_argument("-minClusterSize", type=int, default=2)
    run.add_argument("-minPrivateClusterSize", type=int, default=1)
    run.add_argument("-maxClusterDist", type=float, default=0.1)
    run.add_argument("-minSupport", type=int, default=2, help="min SSNVs per network node")
    run.add_argument("-e", type=float, default=0.1, help="VAF error margin epsilon")
    run.add_argument("-maxTrees", type=int, default=100000)
    run.add_argument("-s", type=int, default=5, dest="num_save", help="trees to save")
    run.add_argument("-cp", action="store_true", help="input values are cell prevalences")
    run.add_argument("-clustersFile", default=None, help="pre-computed cluster file")
    run.add_argument("-n", type=int, default=0, dest="normal", help="normal column index")
    run.add_argument("-noPrivateConstraint", action="store_true",
                     help="do not restrict private-node parents")
    run.add_argument("-seed", type=int, default=0)
    run.add_argument("-o", default=".", dest="outdir", help="output directory")
    run.add_argument("-dot", default=None, help="dot output path (default <outdir>/top_tree.dot)")
    run.add_argument("-json", default=None, help="bundle path (default <outdir>/bundle.json)")
    run.add_argument("--no-figures", action="store_true")

    sim = sub.add_parser("simulate", help="generate a synthetic SSNV dataset plus ground truth")
    sim.add_argument("-samples", type=int, default=5, help="tumor sample count")
    sim.add_argument("-scheme", choices=["localized", "randomized"], default="localized")
    sim.add_argument("-coverage", default="inf", help="read coverage (integer or 'inf')")
    sim.add_argument("-pSSNV", type=float, default=0.15)
    sim.add_argument("-pCNV", type=float, default=0.0)
    sim.add_argument("-pDeath", type=float, default=0.06)
    sim.add_argument("-iterations", type=int, default=50)
    sim.add_argument("-subclones", type=int, default=5, help="max subclones per sample")
    sim.add_argument("-cells", type=int, default=1000, help="cells drawn per sample")
    sim.add_argument("-seed", type=int, default=0)
    sim.add_argument("-replicate", type=int, default=0)
    sim.add_argument("-o", required=True, dest="prefix", help="output prefix")

    ev = sub.add_parser("evaluate", help="score a result bundle against simulator ground truth")
    ev.add_argument("-truth", required=True)
    ev.add_argument("-bundle", required=True)
    ev.add_argument("-o", default="metrics.tsv", dest="out")
    ev.add_argument("-label", default="run")
    ev.add_argument("--no-figures", action="store_true")

    srv = sub.add_parser("serve", help="serve the viewer over local HTTP for a bundle")
    srv.add_argument("bundle")
    srv.add_argument("-port", type=int, default=8000)
    srv.add_argument("-assets", default=None, help="viewer asset directory")
    return parser


def _cmd_run(args) -> int:
    cfg = RunConfig(
        calling=CallingConfig(t_present=args.t_present, t_absent=args.t_absent),
        clustering=ClusteringConfig(
            min_cluster_size=args.minClusterSize,
            min_private_cluster_size=args.minPrivateClusterSize,
            collapse_distance=args.maxClusterDist,
            seed=args.seed,
        ),
        network=NetworkConfig(
            epsilon_edge=args.e,
            constrain_private=not args.noPrivateConstraint,
            min_node_support=args.minSupport,
        ),
        search=SearchConfig(epsilon_tree=args.e, max_trees=args.maxTrees),
        num_save=args.num_save,
        input_mode="cp" if args.cp else ("clusters" if args.clustersFile else "vaf"),
    )
    try:
        samples, records = parse_snv_table(args.input, cp_mode=args.cp, normal_index=args.normal)
        clusters = None
        if args.clustersFile:
            clusters = parse_cluster_file(args.clustersFile, samples, records)
    except (InputError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    bundle = run_pipeline(samples, records, cfg, clusters=clusters)

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    bundle_path = Path(args.json) if args.json else outdir / "bundle.json"
    write_bundle(bundle_path, bundle.data)
    write_summary(outdir / "summary.txt", bundle.data)
    for line in summary_lines(bundle.data):
        print(line)
    if bundle.trees:
        dot_path = Path(args.dot) if args.dot else outdir / "top_tree.dot"
        write_dot(dot_path, bundle.data)
        if not args.no_figures:
            from .plots import render_tree_figure

            render_tree_figure(bundle.data, outdir / "top_tree.png")
        return EXIT_OK
    return EXIT_NO_TREE


def _cmd_simulate(args) -> int:
    coverage = None if args.coverage == "inf" else int(args.coverage)
    cfg = SimulationConfig(
        p_ssnv=args.pSSNV,
        p_cnv=args.pCNV,
        p_death=args.pDeath,
        iterations=args.iterations,
        cells_per_sample=args.cells,
        subclones_max=args.subclones,
        seed=args.seed,
    )
    rng = replicate_rng(args.seed, args.replicate)
    dataset = generate_dataset(
        cfg, args.samples, scheme=args.scheme, noise=NoiseConfig(coverage=coverage), rng=rng
    )
    write_snv_table(f"{args.prefix}.tsv", dataset.samples, dataset.records)
    write_truth_file(f"{args.prefix}.truth.tsv", dataset)
    print(
        f"simulated {len(dataset.records)} SSNVs over {args.samples} tumor samples "
        f"({dataset.tree.n_populations} populations)"
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    try:
        truth = read_truth_file(args.truth)
        bundle = ResultBundle(data=read_bundle(args.bundle))
    except (InputError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    idx_to_sid = {}
    for snv in bundle.data["snvs"]:
        desc = snv["desc"]
        if desc.startswith("ssnv"):
            idx_to_sid[snv["idx"]] = int(desc[4:])
    profiles = {
        idx_to_sid[i]: p for i, p in snv_profile_map(bundle).items() if i in idx_to_sid
    }
    sensitivity = presence_sensitivity(truth, profiles)

    if bundle.trees:
        node_map = snv_node_map(bundle)
        snv_node = {
            idx_to_sid[i]: n for i, n in node_map.items() if i in idx_to_sid
        }
        levels = {n["id"]: n["level"] for n in bundle.data["network"]["nodes"]}
        report = compare_tree(
            truth,
            snv_node,
            [tuple(e) for e in bundle.trees[0]["edges"]],
            levels,
        )
    else:
        report = MetricReport()
    report.pct_snvs_assigned_correctly = sensitivity

    rows = [(args.label, report, 1 if report.tree_reconstructed else 0)]
    write_metrics_table(args.out, rows)
    if not args.no_figures:
        from .plots import render_metrics_figure

        render_metrics_figure(rows, str(Path(args.out).with_suffix(".png")))
    print(f"sensitivity {sensitivity:.2f}; metrics written to {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import functools
    import http.server

    assets = Path(args.assets) if args.assets else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    bundle_path = Path(args.bundle)
    if not bundle_path.exists():
        print(f"input error: no such bundle {bundle_path}", file=sys.stderr)
        return EXIT_INPUT

    class Handler(http.server.SimpleHTTPRequestHandler):
        def do_GET(self):  # noqa: N802
            if self.path in ("/bundle.json", "/bundle"):
                payload = bundle_path.read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)
                return
            super().do_GET()

    handler = functools.partial(Handler, directory=str(assets))
    with http.server.ThreadingHTTPServer(("127.0.0.1", args.port), handler) as httpd:
        print(f"serving viewer on http://127.0.0.1:{args.port}/ (assets: {assets})")
        try:
            httpd.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "evaluate":
        return _cmd_evaluate(args)
    return _cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
