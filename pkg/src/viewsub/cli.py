"""Command-line front end.

Thread count for ``ingest`` comes from ``VIEWSUB_THREADS`` (default: CPU count).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import benchmark, store
from .mesh import MeshError, read_off
from .pose import normalize_pose
from .render import geodesic_sphere, render_views, write_pgm
from .retrieval import (
    preprocess_query,
    rank_database,
    ranked_csv_lines,
    try_preprocess_database_model,
)
from .subspace import DEFAULT_DIMS, assemble_training_matrix, train

log = logging.getLogger("viewsub")


class CliError(Exception):
    pass


def _threads() -> int:
    raw = os.environ.get("VIEWSUB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(f"VIEWSUB_THREADS must be an integer, got {raw!r}") from None


def _mesh_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"not a directory: {d}")
    files = sorted(p for p in d.rglob("*") if p.suffix.lower() == ".off")
    if not files:
        raise CliError(f"no .off files under {d}")
    return files


def _load_meshes(files):
    out = []
    for p in files:
        try:
            out.append((p.stem, read_off(p)))
        except MeshError as exc:
            log.warning("skipping %s: %s", p, exc)
    return out


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise CliError(f"grid must look like lo:hi:n, got {text!r}") from None


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_db(args):
    model = store.load_model(args.model)
    db = store.load_store(args.db, model)
    return model, db


def cmd_train(args):
    meshes = [m for _, m in _load_meshes(_mesh_files(args.mesh_dir))]
    X = assemble_training_matrix(meshes)
    log.info("training %s-%s on %d views", args.subspace, args.dim, X.shape[1])
    model = train(args.subspace, X, args.dim, seed=args.seed)
    store.save_model(model, args.output)


def cmd_ingest(args):
    model = store.load_model(args.model)
    meshes = _load_meshes(_mesh_files(args.mesh_dir))
    views = None if args.views == "auto" else int(args.views)

    def work(item):
        mid, mesh = item
        return try_preprocess_database_model(mesh, model, args.tc, mid, views)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        records = [d for d in pool.map(work, meshes) if d is not None]
    st = store.DescriptorStore(store.Fingerprint.of(model), args.tc, records)
    store.save_store(st, args.output)
    log.info("stored %d descriptors", len(records))


def cmd_query(args):
    model, db = _load_db(args)
    q = preprocess_query(read_off(args.mesh), model, db.t_c, Path(args.mesh).stem)
    ranked = rank_database(q, db.records, args.tf)
    lines = ranked_csv_lines(q.id, ranked, args.n)
    _write_text(args.output, "\n".join(lines) + "\n")


def _classification(path):
    try:
        return benchmark.parse_cla(Path(path).read_text())
    except OSError as exc:
        raise CliError(str(exc)) from None


def cmd_eval(args):
    _, db = _load_db(args)
    cla = _classification(args.cla)
    rows = benchmark.sweep(db.records, None, "tf", [args.tf], cla)
    _write_text(args.output, benchmark.format_report(rows))


def cmd_sweep(args):
    _, db = _load_db(args)
    cla = _classification(args.cla)
    grid = _parse_grid(args.grid)
    try:
        rows = benchmark.sweep(db.records, None, args.param, grid, cla, t_f=args.tf)
    except ValueError as exc:
        raise CliError(f"{exc} (ingest with --views 18 for categorization sweeps)") from None
    _write_text(args.output, benchmark.format_report(rows))


def cmd_export_basis(args):
    model = store.load_model(args.model)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    side = int(round(np.sqrt(model.M)))
    for k in range(model.K):
        write_pgm(out / f"basis_{k:03d}.pgm", model.basis[:, k].reshape(side, side), rescale=True)


def cmd_render(args):
    mesh, _ = normalize_pose(read_off(args.mesh))
    sphere = geodesic_sphere(0 if args.views == 6 else 1)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(render_views(mesh, sphere)):
        write_pgm(out / f"view_{i:02d}.pgm", img)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="viewsub", description="View-subspace 3D model retrieval")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="learn a subspace from training meshes")
    s.add_argument("--subspace", choices=sorted(DEFAULT_DIMS), default="pca")
    s.add_argument("--dim", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("mesh_dir")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("ingest", help="build a descriptor store")
    s.add_argument("--model", required=True)
    s.add_argument("--tc", type=float, default=0.4)
    s.add_argument("--views", choices=["auto", "6", "18"], default="auto",
                   help="force a view count instead of categorizing")
    s.add_argument("mesh_dir")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("query", help="rank the store against one mesh")
    s.add_argument("--model", required=True)
    s.add_argument("--db", required=True)
    s.add_argument("--tf", type=float, default=0.4)
    s.add_argument("-n", type=int, default=None, help="print only the top n")
    s.add_argument("mesh")
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=cmd_query)

    for name, fn, helptext in (("eval", cmd_eval, "leave-one-out evaluation"),
                               ("sweep", cmd_sweep, "threshold sweep")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--model", required=True)
        s.add_argument("--db", required=True)
        s.add_argument("--cla", required=True)
        s.add_argument("--tf", type=float, default=0.4)
        if name == "sweep":
            s.add_argument("--param", choices=["tf", "tc"], required=True)
            s.add_argument("--grid", default=f"0:{np.sqrt(2.0)!r}:15")
        s.add_argument("-o", "--output", default=None)
        s.set_defaults(func=fn)

    s = sub.add_parser("export-basis", help="write basis images as PGM")
    s.add_argument("--model", required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_export_basis)

    s = sub.add_parser("render", help="write depth views of a mesh as PGM")
    s.add_argument("--views", type=int, choices=[6, 18], default=6)
    s.add_argument("mesh")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_render)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, OSError, ValueError, KeyError) as exc:
        print(f"viewsub {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
