"""Command-line entry point: ``predbeam <subcommand> [options]``.

Exit codes: 0 success, 1 configuration or input error, 2 non-finite metric or
training divergence, 3 file-system error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import crlb as crlb_mod
from .baselines import NaiveNetConfig, random_beamformer, upper_bound
from .harness.complexity import complexity_report
from .harness.config import ConfigError, ExperimentConfig, load_config, substream
from .harness.plot import PlotError, plot_csv
from .harness.results import ResultRow, SchemaError, write_csv
from .harness.runner import (NonFiniteMetric, datasets_for, model_meta, run_sweep,
                             train_method)
from .hcl import HclConfig
from .nn.params import dumps_params, load_params
from .system import SystemParams, dbm_to_w, steering_vector
from .training import (TrainingError, evaluate, evaluate_beamformers,
                       load_dataset, save_dataset)

EXIT_CONFIG, EXIT_NONFINITE, EXIT_IO = 1, 2, 3

log = logging.getLogger("predbeam")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig(system=SystemParams())
    if getattr(args, "no_plots", False):
        cfg = cfg.replace(plots=False)
    return cfg


def _seed(args, cfg) -> int:
    return cfg.seed if args.seed is None else args.seed


def _out(args, cfg) -> Path:
    out = Path(args.out if args.out else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    cfg = _config(args)
    seed, out = _seed(args, cfg), _out(args, cfg)
    p, pos = cfg.point(cfg.values[0])
    tr, te = datasets_for(cfg, p, pos, seed)
    save_dataset(tr, out / "train.json")
    save_dataset(te, out / "test.json")
    print(f"wrote {len(tr)} training and {len(te)} test examples to {out}")
    return 0


def _load_or_generate(args, cfg, seed):
    if getattr(args, "data", None):
        d = Path(args.data)
        return load_dataset(d / "train.json"), load_dataset(d / "test.json")
    p, pos = cfg.point(cfg.values[0])
    return datasets_for(cfg, p, pos, seed)


def cmd_train(args) -> int:
    cfg = _config(args)
    seed, out = _seed(args, cfg), _out(args, cfg)
    tr, _ = _load_or_generate(args, cfg, seed)
    for method in args.method:
        params, report, _ = train_method(cfg, method, tr, seed)
        (out / f"{method}.params").write_text(dumps_params(params))
        (out / f"{method}.json").write_text(model_meta(method, report))
        (out / f"{method}-train.csv").write_text(report.to_csv(cfg.timing))
        last = report.epochs[-1]
        print(f"{method}: {len(report.epochs)} epochs, final cost {last.cost:.6g}, "
              f"sum-rate term {last.sum_rate:.4f}")
    return 0


def _model_config(meta_path: Path):
    d = json.loads(meta_path.read_text())
    method = d.pop("method")
    cls = HclConfig if method == "hcl" else NaiveNetConfig
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return method, cls(**d)


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    seed, out = _seed(args, cfg), _out(args, cfg)
    _, te = _load_or_generate(args, cfg, seed)
    p = te.params
    project = cfg.project_power and not args.no_projection
    ckdir = Path(args.checkpoints)
    rows: List[ResultRow] = []
    value = cfg.values[0]
    for method in cfg.methods:
        if method == "upper_bound":
            ub = [upper_bound(ex.channel, p) for ex in te.examples]
            m = evaluate_beamformers([u[0] for u in ub], te, p, [u[1] for u in ub]).metrics
        elif method == "random":
            rng = np.random.default_rng(substream(seed, "random-beams"))
            m = evaluate_beamformers([random_beamformer(p, rng) for _ in te.examples], te, p).metrics
        else:
            meta = ckdir / f"{method}.json"
            if not meta.exists():
                log.warning("no checkpoint for %s in %s; skipped", method, ckdir)
                continue
            _, mcfg = _model_config(meta)
            m = evaluate(load_params(ckdir / f"{method}.params"), te, p, mcfg, project)
        bad = [k for k, v in m.items() if not math.isfinite(v)]
        if bad:
            raise NonFiniteMetric(f"non-finite {bad} for {method}")
        rows.append(ResultRow.from_metrics(seed, cfg.axis, value, method, m))
        print(f"{method:12s} sum-rate {m['mean_sum_rate']:.4f}  "
              f"CRLB(theta) {m['mean_crlb_theta']:.3e}  CRLB(d) {m['mean_crlb_dist']:.3e}")
    write_csv(rows, out / "evaluation.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    seed, out = _seed(args, cfg), _out(args, cfg)
    project = cfg.project_power and not args.no_projection
    rows = run_sweep(cfg, seed, out, project=project)
    print(f"wrote {len(rows)} rows to {out / 'results.csv'}")
    return 0


def cmd_plot(args) -> int:
    svg = plot_csv(args.csv, args.metric, args.axis, args.log, args.methods)
    out = Path(args.out) if args.out else Path(args.csv).with_name(f"{args.metric}.svg")
    out.write_text(svg)
    print(f"wrote {out}")
    return 0


def _read_beam(path: Path, n_tx: int, k: int) -> np.ndarray:
    rows = [ln.split() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    W = np.array([[complex(t) for t in r] for r in rows])
    if W.shape != (n_tx, k):
        raise ConfigError(f"beam file {path} is {W.shape}, expected ({n_tx}, {k})")
    return W


def cmd_crlb(args) -> int:
    cfg = _config(args)
    thetas = np.radians(args.theta_deg)
    dists = np.asarray(args.dist_m, dtype=float)
    if thetas.shape != dists.shape:
        raise ConfigError("--theta-deg and --dist-m need the same number of values")
    k = thetas.size
    p = cfg.system.replace(n_vehicles=k)
    if args.power_dbm is not None:
        p = p.replace(power_budget_w=dbm_to_w(args.power_dbm))
    if args.beam == "aligned":
        W = np.stack([steering_vector(t, p.n_tx) for t in thetas], axis=1)
        W *= math.sqrt(p.power_budget_w / k)
    else:
        W = _read_beam(Path(args.beam), p.n_tx, k)
    ang, dist = crlb_mod.crlb_all(thetas, dists, W, p)
    snr = crlb_mod.echo_snr_all(thetas, dists, W, p)
    print("vehicle,theta_deg,dist_m,echo_snr,crlb_theta_rad2,sqrt_crlb_theta_rad,"
          "crlb_dist_m2,sqrt_crlb_dist_m")
    for i in range(k):
        vals = (args.theta_deg[i], dists[i], snr[i], ang[i], math.sqrt(ang[i]), dist[i],
                math.sqrt(dist[i]))
        print(",".join([str(i)] + [repr(float(v)) for v in vals]))
    return 0


def cmd_complexity(args) -> int:
    cfg = _config(args)
    p = cfg.system
    hc = cfg.hcl_config(p)
    if args.tau is not None:
        hc = HclConfig(**{**hc.__dict__, "tau": args.tau})
    epochs = cfg.epochs if args.epochs is None else args.epochs
    n_ex = cfg.n_train if args.n_examples is None else args.n_examples
    print(complexity_report(hc, epochs, n_ex).render(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="predbeam", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="experiment configuration file")
        sp.add_argument("--seed", type=int, help="override the top-level seed")
        if out:
            sp.add_argument("--out", help="output directory (default: from config)")

    sp = sub.add_parser("generate", help="write train/test datasets")
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("train", help="train networks and write checkpoints")
    common(sp)
    sp.add_argument("--data", help="directory with train.json/test.json (default: regenerate)")
    sp.add_argument("--method", nargs="+", choices=("hcl", "naive"), default=["hcl"])
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="evaluate checkpoints and baselines on the test set")
    common(sp)
    sp.add_argument("--data", help="directory with train.json/test.json (default: regenerate)")
    sp.add_argument("--checkpoints", default=".", help="directory holding <method>.params/.json")
    sp.add_argument("--no-projection", action="store_true", help="skip power projection")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="run the configured sweep and write results.csv")
    common(sp)
    sp.add_argument("--no-plots", action="store_true", help="do not write SVG plots")
    sp.add_argument("--no-projection", action="store_true", help="skip power projection")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("plot", help="SVG line chart from a results CSV")
    sp.add_argument("csv")
    sp.add_argument("--metric", default="mean_sum_rate")
    sp.add_argument("--axis")
    sp.add_argument("--log", action="store_true", help="log-scale y axis")
    sp.add_argument("--methods", nargs="*", help="subset of methods to draw")
    sp.add_argument("--out", help="SVG path (default: next to the CSV)")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("crlb", help="CRLBs for given angles, distances and beams")
    common(sp, out=False)
    sp.add_argument("--theta-deg", type=float, nargs="+", required=True)
    sp.add_argument("--dist-m", type=float, nargs="+", required=True)
    sp.add_argument("--power-dbm", type=float)
    sp.add_argument("--beam", default="aligned",
                    help="'aligned' (equal-power matched beams) or a text file of complex entries")
    sp.set_defaults(func=cmd_crlb)

    sp = sub.add_parser("complexity", help="operation counts of the conv-LSTM network")
    common(sp, out=False)
    sp.add_argument("--tau", type=int)
    sp.add_argument("--epochs", type=int, help="training passes I_t")
    sp.add_argument("--n-examples", type=int, help="training examples N_e")
    sp.set_defaults(func=cmd_complexity)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaError, PlotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteMetric, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
