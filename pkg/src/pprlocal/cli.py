"""Command-line front end.

Exit codes: 0 success, 2 parameter error, 3 data error, 4 transport error
(with a checkpoint written when one was configured).
"""

from __future__ import annotations

import json
import sys
import time
import warnings
from pathlib import Path

import click

from . import blockmodel, clustering, crawl, experiments, plots, server
from .errors import DataError, ParameterError, TransportError
from .graph import Graph, load_edge_list, read_id_map, write_edge_list, write_id_map
from .ppr import PreferenceVector, approximate_ppr, parse_result, serialize_result


@click.group()
@click.version_option(package_name="pprlocal")
def cli():
    """Local graph clustering with personalized PageRank."""


def _load_graph(path: str, directed: bool, ids_path: str | None) -> Graph:
    roster = None
    if ids_path:
        with open(ids_path, newline="") as fh:
            roster = read_id_map(fh)
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh, directed=directed, id_map=roster)


def _parse_seeds(text: str) -> list[str]:
    seeds = [token.strip() for token in text.split(",") if token.strip()]
    if not seeds:
        raise ParameterError("no seed ids given")
    return seeds


def _parse_alpha(token: str) -> float:
    token = token.strip()
    if "/" in token:
        num, den = token.split("/", 1)
        return float(num) / float(den)
    return float(token)


def _seed_indices(graph: Graph, seeds: list[str]) -> list[int]:
    missing = [s for s in seeds if s not in graph.index]
    if missing:
        raise DataError(f"seed ids not in graph: {', '.join(missing)}")
    return [graph.index[s] for s in seeds]


graph_option = click.option("--graph", "graph_path", required=True,
                            type=click.Path(exists=True, dir_okay=False),
                            help="Edge-list file, one 'src<TAB>dst' arc per line.")
directed_option = click.option("--directed", is_flag=True,
                               help="Treat the edge list as directed.")
ids_option = click.option("--ids", "ids_path", default=None,
                          type=click.Path(exists=True, dir_okay=False),
                          help="Optional id-map CSV fixing the node order.")


@cli.command()
@click.option("--params", "params_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Block model parameter JSON.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", "seed_override", type=int, default=None,
              help="Override the seed recorded in the parameter file.")
def generate(params_path, out_path, seed_override):
    """Sample a block model graph to an edge-list file.

    Writes the graph, an id map, and a metadata sidecar with memberships
    and sampling statistics.
    """
    doc = json.loads(Path(params_path).read_text())
    params = blockmodel.realize_params(doc, seed_override=seed_override)
    seed = params.meta["seed"]
    with warnings.catch_warnings():
        # the clip rate is echoed below; skip the duplicate Python warning
        warnings.filterwarnings("ignore", message="clipped")
        graph, stats = blockmodel.sample_dcsbm_detailed(
            params, blockmodel.replicate_rng(seed, 3))
    out = Path(out_path)
    with out.open("w", encoding="utf-8") as fh:
        write_edge_list(graph, fh)
    with out.with_suffix(".ids.csv").open("w", newline="") as fh:
        write_id_map(graph, fh)
    meta = {"n_nodes": graph.n_nodes, "n_arcs": graph.n_arcs,
            "directed": params.directed, "seed": seed,
            "z": (params.z + 1).tolist(), "sampling": stats}
    out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    click.echo(f"wrote {graph.n_nodes} nodes / {graph.n_arcs} arcs to {out}")
    if stats["clip_rate"] > 0.01:
        click.echo(f"warning: clipped {stats['clipped_pairs']} pair probabilities "
                   f"({stats['clip_rate']:.2%})", err=True)


@cli.command()
@graph_option
@directed_option
@ids_option
@click.option("--seed", "seed_ids", required=True,
              help="Seed id, or comma-separated ids for a uniform multi-seed.")
@click.option("--alpha", default=0.15, show_default=True)
@click.option("--epsilon", default=1e-7, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def ppr(graph_path, directed, ids_path, seed_ids, alpha, epsilon, out_path):
    """Approximate personalized PageRank on a local graph."""
    graph = _load_graph(graph_path, directed, ids_path)
    seeds = _seed_indices(graph, _parse_seeds(seed_ids))
    result = approximate_ppr(graph, PreferenceVector.uniform(seeds), alpha, epsilon)
    Path(out_path).write_text(serialize_result(result, ids=graph.ids))
    click.echo(f"{result.pushes} pushes, {result.nodes_touched} nodes touched, "
               f"{len(result.p)} estimated")


@cli.command()
@click.option("--result", "result_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@graph_option
@directed_option
@ids_option
@click.option("--mode", type=click.Choice(clustering.MODES), default="appr",
              show_default=True)
@click.option("--tau", default=clustering.DEFAULT_TAU, show_default=True,
              help="Regularizer added to in-degrees in rppr mode.")
@click.option("-n", "size", default=200, show_default=True, help="Cluster size.")
@click.option("--seed", "seed_ids", default=None,
              help="Seed ids (marked in the output, kept rank-eligible).")
@click.option("--meta", "meta_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Metadata sidecar with block labels, enables accuracy.")
@click.option("--target-block", default=1, show_default=True,
              help="1-based block to score accuracy against.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--plot/--no-plot", default=True, show_default=True)
def cluster(result_path, graph_path, directed, ids_path, mode, tau, size,
            seed_ids, meta_path, target_block, out_path, plot):
    """Rank a PPR result into a local cluster CSV (plus metrics and figure)."""
    graph = _load_graph(graph_path, directed, ids_path)
    result = parse_result(Path(result_path).read_text())
    unknown = [k for k in result.p if k not in graph.index]
    if unknown:
        raise DataError(f"result mentions ids missing from the graph: {unknown[:5]}")
    p_map = {graph.index[k]: v for k, v in result.p.items()}
    seeds = set(_seed_indices(graph, _parse_seeds(seed_ids))) if seed_ids else set()
    ranked = clustering.rank_cluster(p_map, graph.in_degrees, mode, size,
                                     tau=tau, seeds=seeds)
    out = Path(out_path)
    with out.open("w", newline="") as fh:
        clustering.write_cluster_csv(ranked, fh, ids=graph.ids, seeds=seeds)
    z = None
    if meta_path:
        meta = json.loads(Path(meta_path).read_text())
        z = [int(v) - 1 for v in meta["z"]]
    metrics = clustering.cluster_metrics(
        ranked, graph=graph, z=z,
        target_block=(target_block - 1) if z is not None else None)
    out.with_suffix(".metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True))
    if plot and len(ranked):
        plots.plot_cluster_scatter(ranked, out.with_suffix(".png"), seeds=seeds)
    click.echo(json.dumps(metrics, sort_keys=True))


@cli.command(name="crawl")
@click.option("--base-url", default=None, help="Remote graph endpoint; "
              f"defaults to ${crawl.ENV_BASE_URL}.")
@click.option("--token", default=None, help=f"Bearer token; defaults to ${crawl.ENV_TOKEN}.")
@click.option("--seed", "seed_ids", required=False, default=None,
              help="Seed id(s); optional when resuming from a checkpoint.")
@click.option("--alpha", default=0.15, show_default=True)
@click.option("--epsilon", default=1e-7, show_default=True)
@click.option("--checkpoint", "checkpoint_path", default=None,
              type=click.Path(dir_okay=False))
@click.option("--checkpoint-every", default=1000, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def crawl_cmd(base_url, token, seed_ids, alpha, epsilon, checkpoint_path,
              checkpoint_every, out_path):
    """Crawl a remote graph and approximate PPR over the wire protocol.

    If the checkpoint file already exists the run resumes from it, taking
    alpha and epsilon from the checkpoint rather than the flags.
    """
    client = crawl.RemoteGraphClient(base_url, auth_token=token)
    pi = None
    if checkpoint_path and Path(checkpoint_path).exists():
        click.echo(f"resuming from checkpoint {checkpoint_path}", err=True)
        alpha = epsilon = None
    elif seed_ids:
        pi = PreferenceVector.uniform(_parse_seeds(seed_ids))
    result = crawl.crawl_ppr(client, pi, alpha, epsilon,
                             checkpoint_path=checkpoint_path,
                             checkpoint_every=checkpoint_every)
    text = serialize_result(result)
    if out_path:
        Path(out_path).write_text(text)
    else:
        click.echo(text)
    if client.missing:
        click.echo(f"warning: {len(client.missing)} node(s) were not served and "
                   f"were treated as dangling: {sorted(client.missing)[:5]}", err=True)
    click.echo(f"{result.pushes} pushes, {client.fetch_count} fetches, "
               f"{result.nodes_touched} nodes touched", err=True)


@cli.command()
@graph_option
@directed_option
@ids_option
@click.option("--bind", default="127.0.0.1:8080", show_default=True)
@click.option("--fault-429", default=0.0, show_default=True,
              help="Probability of replying 429 to a request.")
@click.option("--fault-5xx", default=0.0, show_default=True)
@click.option("--latency", default=0.0, show_default=True, help="Seconds added per request.")
@click.option("--retry-after", default=1.0, show_default=True,
              help="Retry-After header value on injected 429s.")
@click.option("--fault-seed", default=0, show_default=True)
def serve(graph_path, directed, ids_path, bind, fault_429, fault_5xx, latency,
          retry_after, fault_seed):
    """Serve a graph over the crawl wire protocol until interrupted."""
    graph = _load_graph(graph_path, directed, ids_path)
    host, _, port = bind.partition(":")
    try:
        address = (host or "127.0.0.1", int(port or 0))
    except ValueError as exc:
        raise ParameterError(f"bad bind address {bind!r}") from exc
    try:
        handle = server.serve_graph(graph, address, fault_429=fault_429,
                                    fault_5xx=fault_5xx, latency=latency,
                                    retry_after=retry_after, fault_seed=fault_seed)
    except OSError as exc:
        raise DataError(f"cannot bind {bind}: {exc}") from exc
    click.echo(f"serving {graph!r} at {handle.base_url} (Ctrl-C to stop)")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        handle.shutdown()


@cli.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", default=1, show_default=True)
@click.option("--plot/--no-plot", default=True, show_default=True)
def experiment(config_path, out_path, workers, plot):
    """Run a configured experiment sweep to CSV (plus figures)."""
    config = experiments.ExperimentConfig.from_json(Path(config_path).read_text())
    rows = experiments.run_experiment(config, out_csv=out_path, workers=workers)
    failed = sum(1 for row in rows if row.get("error"))
    click.echo(f"{len(rows)} rows -> {out_path}" +
               (f" ({failed} failed)" if failed else ""))
    if plot:
        for path in plots.plot_experiment(rows, config, out_path):
            click.echo(f"figure -> {path}")


@cli.command()
@graph_option
@directed_option
@ids_option
@click.option("--seed", "seed_ids", required=True)
@click.option("--alphas", default="0.1,0.15,0.25", show_default=True,
              help="Comma-separated list; fractions like 1/3 are accepted.")
@click.option("--epsilon", default=1e-7, show_default=True)
@click.option("-n", "size", default=300, show_default=True)
@click.option("--mode", type=click.Choice(clustering.MODES), default="appr",
              show_default=True)
@click.option("--tau", default=clustering.DEFAULT_TAU, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--plot/--no-plot", default=True, show_default=True)
def sensitivity(graph_path, directed, ids_path, seed_ids, alphas, epsilon, size,
                mode, tau, out_path, plot):
    """Pairwise cluster overlap across teleportation constants."""
    graph = _load_graph(graph_path, directed, ids_path)
    seeds = _seed_indices(graph, _parse_seeds(seed_ids))
    alpha_grid = [_parse_alpha(tok) for tok in alphas.split(",") if tok.strip()]
    result = experiments.teleportation_sensitivity(
        graph, PreferenceVector.uniform(seeds), alpha_grid, epsilon, size,
        mode=mode, tau=tau)
    out = Path(out_path)
    with out.open("w", newline="") as fh:
        fh.write("alpha," + ",".join(f"{a:g}" for a in result.alphas) + "\n")
        for i, alpha in enumerate(result.alphas):
            fh.write(f"{alpha:g}," + ",".join(repr(v) for v in result.overlap[i]) + "\n")
    summary = {"mean_pairwise_overlap": result.mean_pairwise,
               "common_fraction": result.common_fraction,
               "alphas": list(result.alphas), "n": size, "mode": mode}
    out.with_suffix(".metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    if plot:
        plots.plot_sensitivity(result, out.with_suffix(".png"))
    click.echo(json.dumps(summary, sort_keys=True))


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(130)
    except ParameterError as exc:
        click.echo(f"parameter error: {exc}", err=True)
        sys.exit(2)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(3)
    except TransportError as exc:
        click.echo(f"transport error: {exc}", err=True)
        sys.exit(4)
    sys.exit(0)


if __name__ == "__main__":
    main()
