"""Command-line interface: dataset generation, reference solving, the
residual oracle gate, sequential training with resumable checkpoints,
evaluation tables, and CSV export.

Every failure exits nonzero after printing a single machine-parsable
"ERROR <CODE>: message" line to stderr.  Every run writes a provenance
record next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .arrayfile import ArrayFileError, read_array, write_array
from .config import ConfigError, RunConfig, load_config, sample_inputs
from .metrics import benchmark_run, rows_to_csv
from .network import LayerSpec, NetworkParams
from .residuals import (
    residual_advection,
    residual_burgers,
    residual_cde,
    residual_dre,
    residual_kse,
    residual_nse,
)
from .sampling import InputSample
from .solvers import PdeProblem, solve_reference
from .training import (
    TrainState,
    build_task,
    initial_state,
    train_segment,
)

__all__ = ["main"]


class CliError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"ERROR E_USAGE: {message}", file=sys.stderr)
        raise SystemExit(2)


def _write_provenance(directory: Path, cfg: RunConfig, extra: dict | None = None):
    record = {
        "config": cfg.raw,
        "config_digest": cfg.digest,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        record.update(extra)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "provenance.json", "w") as fh:
        json.dump(record, fh, indent=2, default=str)


def _dataset_dir(cfg: RunConfig) -> Path:
    return cfg.out_dir / "dataset"


def _traj_path(cfg: RunConfig, split: str) -> Path:
    return cfg.out_dir / "trajectories" / f"{split}.scln"


def _checkpoint_dir(cfg: RunConfig) -> Path:
    return cfg.out_dir / "checkpoints"


def cmd_gen_inputs(cfg: RunConfig, args) -> int:
    out = _dataset_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config_digest": cfg.digest, "splits": {}}
    for split in ("train", "test"):
        samples = sample_inputs(cfg, split)
        stacked = np.stack([s.grid_values for s in samples])
        write_array(out / f"{split}.scln", stacked)
        manifest["splits"][split] = {
            "file": f"{split}.scln",
            "count": len(samples),
            "shape": list(stacked.shape),
            "seed": cfg.sampling["seed"],
        }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    _write_provenance(out, cfg)
    print(f"wrote dataset under {out}")
    return 0


def _load_split(cfg: RunConfig, split: str) -> list[InputSample]:
    out = _dataset_dir(cfg)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise CliError("E_MISSING_FILE", f"{manifest_path} (run gen-inputs first)")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("config_digest") != cfg.digest:
        raise CliError("E_HASH_MISMATCH", "dataset was generated from a different config")
    arr = read_array(out / manifest["splits"][split]["file"])
    kind = {
        "diffusion_reaction": "forcing",
        "advection": "coefficient",
    }.get(cfg.problem.family, "initial_condition")
    return [
        InputSample(kind=kind, grid_values=arr[i], problem_tag=cfg.problem.family)
        for i in range(arr.shape[0])
    ]


def cmd_solve_ref(cfg: RunConfig, args) -> int:
    samples = _load_split(cfg, args.split)
    trajs = [solve_reference(cfg.problem, s) for s in samples]
    stacked = np.stack([t.snapshots for t in trajs])
    path = _traj_path(cfg, args.split)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_array(path, stacked)
    _write_provenance(path.parent, cfg, {"split": args.split})
    print(f"wrote {stacked.shape[0]} reference trajectories to {path}")
    return 0


def _residual_for(cfg: RunConfig, task, sample, steps, anchor):
    fam = cfg.problem.family
    if fam == "diffusion_reaction":
        return residual_dre(steps, sample, anchor, task.scheme)
    if fam == "burgers":
        return residual_burgers(steps, anchor, task.scheme)
    if fam == "advection":
        return residual_advection(steps, sample, anchor, task.scheme)
    if fam == "convection_diffusion_bl":
        return residual_cde(steps, anchor, task.scheme)
    if fam == "kse_2d":
        return residual_kse(steps, anchor, task.scheme)
    return residual_nse(steps, anchor, task.scheme)


def cmd_residual_check(cfg: RunConfig, args) -> int:
    samples = _load_split(cfg, args.split)
    path = _traj_path(cfg, args.split)
    if not path.exists():
        raise CliError("E_MISSING_FILE", f"{path} (run solve-ref first)")
    snaps = read_array(path)
    task = build_task(cfg.problem, samples)
    failures = 0
    for i, sample in enumerate(samples):
        anchor, steps = snaps[i][0], snaps[i][1:]
        rep = _residual_for(cfg, task, sample, steps, anchor)
        energy = float(np.sum(np.abs(snaps[i]) ** 2))
        bound = 1e-16 * (1.0 + energy)
        ok = rep.total <= bound
        failures += 0 if ok else 1
        print(
            f"sample {i}: total={rep.total:.3e} bound={bound:.3e} "
            f"{'ok' if ok else 'FAIL'}"
        )
    if failures:
        raise CliError("E_RESIDUAL_GATE", f"{failures} sample(s) exceeded the bound")
    print(f"all {len(samples)} residual totals within the oracle bound")
    return 0


def _params_meta(params: NetworkParams) -> dict:
    return {
        "layout": [[off, list(shape)] for off, shape in params.layout],
        "arch": [asdict(spec) for spec in params.arch],
        "in_shape": list(params.in_shape),
        "out_shape": list(params.out_shape),
        "out_map": params.out_map,
    }


def _params_from_meta(meta: dict, flat: np.ndarray) -> NetworkParams:
    return NetworkParams(
        flat=flat,
        layout=[(int(off), tuple(shape)) for off, shape in meta["layout"]],
        arch=tuple(LayerSpec(**spec) for spec in meta["arch"]),
        in_shape=tuple(meta["in_shape"]),
        out_shape=tuple(meta["out_shape"]),
        out_map=meta["out_map"],
    )


def write_checkpoint(directory: Path, cfg: RunConfig, state: TrainState, trained: NetworkParams):
    """Persist one completed segment: trained parameters bit-for-bit, the
    chained anchors, and enough metadata to resume or reject a mismatched
    config."""
    q = state.q - 1  # state.q is the next segment; we just finished q-1
    directory.mkdir(parents=True, exist_ok=True)
    write_array(directory / f"segment_{q:02d}.scln", trained.flat)
    write_array(directory / f"anchors_{q:02d}.scln", state.anchors)
    meta = {
        "segment": q,
        "config_digest": cfg.digest,
        "seed": state.seed,
        "loss_history": state.histories[-1],
        "wall_time": state.wall_time,
        **_params_meta(trained),
    }
    with open(directory / f"segment_{q:02d}.json", "w") as fh:
        json.dump(meta, fh)


def read_checkpoint(directory: Path, q: int, cfg: RunConfig):
    meta_path = directory / f"segment_{q:02d}.json"
    if not meta_path.exists():
        raise CliError("E_MISSING_FILE", str(meta_path))
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("config_digest") != cfg.digest:
        raise CliError("E_HASH_MISMATCH", f"checkpoint {q} belongs to a different config")
    flat = read_array(directory / f"segment_{q:02d}.scln")
    anchors = read_array(directory / f"anchors_{q:02d}.scln")
    return _params_from_meta(meta, flat), anchors, meta


def _completed_segments(directory: Path) -> list[int]:
    if not directory.exists():
        return []
    out = []
    for p in sorted(directory.glob("segment_*.json")):
        try:
            out.append(int(p.stem.split("_")[1]))
        except ValueError:
            continue
    return out


def cmd_train(cfg: RunConfig, args) -> int:
    samples = _load_split(cfg, "train")
    task = build_task(cfg.problem, samples, arch=cfg.network_layers)
    ckpt = _checkpoint_dir(cfg)
    state = initial_state(task, seed=cfg.init_seed)
    start_q = 1
    if args.resume:
        done = _completed_segments(ckpt)
        if done:
            last = max(done)
            params, anchors, meta = read_checkpoint(ckpt, last, cfg)
            histories = []
            for q in range(1, last + 1):
                _, _, m = read_checkpoint(ckpt, q, cfg)
                histories.append(m["loss_history"])
            state = TrainState(
                q=last + 1,
                params=params.copy(),
                anchors=anchors,
                histories=histories,
                seed=cfg.init_seed,
                wall_time=meta.get("wall_time", 0.0),
            )
            start_q = last + 1
            print(f"resuming after segment {last}")
    for q in range(start_q, cfg.problem.Q + 1):
        state, trained = train_segment(task, state, cfg.optimizer)
        write_checkpoint(ckpt, cfg, state, trained)
        h = state.histories[-1]
        print(
            f"segment {q}: iters={len(h) - 1} loss {h[0]:.6e} -> {h[-1]:.6e}"
        )
    _write_provenance(ckpt, cfg)
    log_path = ckpt / "loss_log.csv"
    with open(log_path, "w") as fh:
        fh.write("segment,iteration,loss\n")
        for qi, h in enumerate(state.histories, start=1):
            for it, value in enumerate(h):
                fh.write(f"{qi},{it},{value:.17g}\n")
    print(f"training complete; loss log at {log_path}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    samples = _load_split(cfg, "test")
    ckpt = _checkpoint_dir(cfg)
    done = _completed_segments(ckpt)
    if len(done) < cfg.problem.Q:
        raise CliError(
            "E_MISSING_FILE",
            f"need {cfg.problem.Q} trained segments, found {len(done)}",
        )
    trained = []
    for q in range(1, cfg.problem.Q + 1):
        params, _, _ = read_checkpoint(ckpt, q, cfg)
        trained.append(params)
    row, singles = benchmark_run(
        cfg.problem,
        trained,
        samples,
        arch=cfg.network_layers,
        per_sample=True,
    )
    out = cfg.out_dir / "eval"
    out.mkdir(parents=True, exist_ok=True)
    table = out / "results.csv"
    with open(table, "w") as fh:
        fh.write(rows_to_csv([row]))
    with open(out / "per_sample.csv", "w") as fh:
        fh.write("sample,mae,rel_l2,l_inf\n")
        for i, t in enumerate(singles):
            fh.write(f"{i},{t.mae:.17g},{t.rel_l2:.17g},{t.l_inf:.17g}\n")
    _write_provenance(out, cfg)
    print(rows_to_csv([row]).strip())
    print(f"tables written under {out}")
    return 0


def cmd_export_csv(args) -> int:
    arr = read_array(args.array)
    flat = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(-1, 1)
    with open(args.output, "w") as fh:
        if np.iscomplexobj(flat):
            for row in flat:
                fh.write(
                    ",".join(f"{v.real:.17g},{v.imag:.17g}" for v in row) + "\n"
                )
        else:
            for row in flat:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    print(f"wrote {args.output}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="speclearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("--config", required=True, help="YAML run configuration")
        return p

    add("gen-inputs", "draw the train/test input datasets")
    p = add("solve-ref", "solve reference trajectories for a dataset split")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p = add("residual-check", "verify reference trajectories zero the loss")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p = add("train", "sequential segment training with checkpoints")
    p.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    add("eval", "error tables for trained checkpoints on the test split")
    p = add("export-csv", "dump any array file as CSV", needs_config=False)
    p.add_argument("array", help="input .scln array file")
    p.add_argument("output", help="output .csv path")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "export-csv":
            return cmd_export_csv(args)
        cfg = load_config(args.config)
        if args.command == "gen-inputs":
            return cmd_gen_inputs(cfg, args)
        if args.command == "solve-ref":
            return cmd_solve_ref(cfg, args)
        if args.command == "residual-check":
            return cmd_residual_check(cfg, args)
        if args.command == "train":
            return cmd_train(cfg, args)
        if args.command == "eval":
            return cmd_eval(cfg, args)
        raise CliError("E_USAGE", f"unknown command {args.command!r}")
    except (CliError, ConfigError, ArrayFileError) as err:
        code = getattr(err, "code", "E_RUNTIME")
        message = str(err)
        if message.startswith(code):
            message = message[len(code):].lstrip(": ")
        print(f"ERROR {code}: {message}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"ERROR E_MISSING_FILE: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
