"""Config-driven experiment runners behind the command line.

Configs are flat ``key=value`` text; a key given several times forms a grid.
Every runner writes its resolved config (all defaults filled in) next to its
outputs and returns a process exit code.
"""
from __future__ import annotations

import csv
import io
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .analysis import (
    ThresholdViolated,
    count_regions_and_crossings,
    extract_pwl_1d,
    hardness_probe,
    threshold,
)
from .construct import (
    GainTooSmall,
    build_blocked_classifier,
    build_exact_classifier,
    verify_classifier,
)
from .distributions import (
    ApproximationCurve,
    FractalDistribution,
    GapStyle,
    UnknownPreset,
    coarse_curve,
    fine_curve,
    preset_curve,
    sample_dataset,
    write_dataset,
    write_keyvalue,
)
from .ifs import BUILTIN_NAMES, MarginTooLarge, UnknownName, builtin_ifs, min_cell_inradius
from .network import ShapeMismatch, load_net, save_net
from .training import PaperUniform, TrainConfig, Uniform, train

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_PROBE, EXIT_INTERNAL = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


# key -> (type, default, is_grid)
_SCHEMA = {
    "fractal": (str, "cantor2d", False),
    "n": (int, 3, False),
    "gamma": (float, None, False),
    "curve": (str, "coarse", False),
    "gap_style": (str, None, False),
    "train_size": (int, 20_000, False),
    "test_size": (int, 4_000, False),
    "seed": (int, 0, False),
    "s": (int, 1, False),
    "verify_points": (int, 20_000, False),
    "net_file": (str, None, False),
    "depth": (int, [1, 2, 3, 4], True),
    "width": (int, [16, 64], True),
    "lr": (float, [1e-2, 1e-3], True),
    "seeds": (int, 3, False),
    "steps": (int, 10_000, False),
    "batch_size": (int, 100, False),
    "eval_every": (int, 500, False),
    "optimizer": (str, "adam", False),
    "init": (str, "uniform", False),
    "t": (int, 2, False),
    "k": (int, 4, False),
    "delta": (float, 0.5, False),
    "trials": (int, 400, False),
    "n_prime": (int, None, False),
}

_LONG_RUN = {
    "n": 5,
    "train_size": 50_000,
    "test_size": 5_000,
    "steps": 1_000_000,
    "depth": [1, 2, 3, 4, 5],
    "width": [10, 20, 50, 100, 200, 400],
    "lr": [1e-2, 1e-3, 1e-4],
}


def parse_config_text(text: str) -> dict:
    raw: dict[str, list[str]] = {}
    for k, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {k}: expected key=value, got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"config line {k}: unknown key {key!r}")
        raw.setdefault(key, []).append(val)
    return raw


def resolve_config(raw: dict, long_run: bool = False) -> dict:
    """Typed values for every key, defaults filled in, basic validation applied."""
    cfg = {}
    for key, (typ, default, grid) in _SCHEMA.items():
        if long_run and key in _LONG_RUN:
            default = _LONG_RUN[key]
        if key in raw:
            try:
                vals = [typ(v) for v in raw[key]]
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw[key]!r}") from None
            if not grid and len(vals) > 1:
                raise ConfigError(f"key {key!r} given {len(vals)} times but is not a grid")
            cfg[key] = vals if grid else vals[0]
        else:
            cfg[key] = list(default) if grid else default
    if cfg["fractal"] not in BUILTIN_NAMES:
        raise ConfigError(f"unknown fractal {cfg['fractal']!r}; choose from {', '.join(BUILTIN_NAMES)}")
    if cfg["n"] < 1:
        raise ConfigError("n must be at least 1")
    for key in ("train_size", "test_size", "seeds", "batch_size", "eval_every", "trials", "s"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be at least 1")
    for key in ("depth", "width", "lr"):
        if not cfg[key] or min(cfg[key]) <= 0:
            raise ConfigError(f"{key} grid must be nonempty and positive")
    if cfg["gap_style"] is None:
        cfg["gap_style"] = "central" if cfg["fractal"] == "cantor2d" else "full"
    if cfg["gap_style"] not in ("central", "full"):
        raise ConfigError("gap_style must be 'central' or 'full'")
    if cfg["optimizer"] not in ("adam", "sgd"):
        raise ConfigError("optimizer must be 'adam' or 'sgd'")
    if cfg["init"] not in ("uniform", "paper_uniform"):
        raise ConfigError("init must be 'uniform' or 'paper_uniform'")
    ifs = builtin_ifs(cfg["fractal"])
    cap = min_cell_inradius(ifs, cfg["n"]) * ifs.scale
    if cfg["gamma"] is None:
        cfg["gamma"] = cap / 5
    if not 0 < cfg["gamma"] < cap:
        raise ConfigError(f"gamma {cfg['gamma']} must lie in (0, {cap}) for n={cfg['n']}")
    make_curve(cfg["curve"], cfg["n"])
    return cfg


def load_config(path, long_run: bool = False) -> dict:
    text = Path(path).read_text(encoding="utf-8") if path else ""
    return resolve_config(parse_config_text(text), long_run)


def make_curve(spec: str, n: int) -> ApproximationCurve:
    spec = spec.strip()
    try:
        if spec == "coarse":
            return coarse_curve(n)
        if spec == "fine":
            return fine_curve(n)
        parts = spec.replace(",", " ").split()
        if len(parts) == 1 and parts[0].isdigit():
            return preset_curve(int(parts[0]), n)
        curve = ApproximationCurve(tuple(float(v) for v in parts))
    except (UnknownPreset, ValueError) as exc:
        raise ConfigError(f"bad curve {spec!r}: {exc}") from None
    if curve.n != n:
        raise ConfigError(f"curve has {curve.n} levels but n={n}")
    return curve


def make_distribution(cfg: dict) -> FractalDistribution:
    ifs = builtin_ifs(cfg["fractal"])
    style = GapStyle.CENTRAL_GAP if cfg["gap_style"] == "central" else GapStyle.FULL_COMPLEMENT
    return FractalDistribution(ifs, cfg["n"], cfg["gamma"], make_curve(cfg["curve"], cfg["n"]), style)


def config_to_text(cfg: dict) -> str:
    lines = []
    for key in _SCHEMA:
        val = cfg[key]
        if val is None:
            continue
        vals = val if isinstance(val, list) else [val]
        for v in vals:
            lines.append(f"{key}={format(v, '.17g') if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def _prepare(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_config(cfg, out: Path):
    (out / "config.txt").write_text(config_to_text(cfg), encoding="utf-8")


def cmd_gen(cfg: dict, out) -> int:
    out = _prepare(out)
    _save_config(cfg, out)
    dist = make_distribution(cfg)
    for name, m, seed in (("train", cfg["train_size"], cfg["seed"]),
                          ("test", cfg["test_size"], cfg["seed"] + 1)):
        data = sample_dataset(dist, m, seed)
        data.meta["curve_spec"] = cfg["curve"]
        write_dataset(data, out / f"{name}.csv")
    print(f"wrote {cfg['train_size']} train and {cfg['test_size']} test samples to {out}")
    return EXIT_OK


def cmd_build_verify(cfg: dict, out, net_file=None) -> int:
    out = _prepare(out)
    _save_config(cfg, out)
    ifs = builtin_ifs(cfg["fractal"])
    n, gamma, s = cfg["n"], cfg["gamma"], cfg["s"]
    net_file = net_file or cfg["net_file"]
    if net_file:
        try:
            net = load_net(net_file)
        except (OSError, ShapeMismatch) as exc:
            print(f"cannot use net file {net_file}: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        if net.input_dim != ifs.dim or net.output_dim != 1:
            print(f"net file {net_file} has the wrong input/output size", file=sys.stderr)
            return EXIT_VERIFY
    else:
        net = (build_exact_classifier(ifs, n, gamma) if s == 1
               else build_blocked_classifier(ifs, n, s, gamma))
        save_net(net, out / "net.txt")
    rep = verify_classifier(net, ifs, n, gamma, cfg["verify_points"], cfg["seed"])
    report = {
        "fractal": cfg["fractal"], "n": n, "s": s, "gamma": gamma,
        "depth": net.depth, "width": net.width,
        "pos_correct": rep.pos_correct, "pos_total": rep.pos_total,
        "neg_correct": rep.neg_correct, "neg_total": rep.neg_total,
        "boundary_skipped": rep.boundary_skipped,
        "pos_rate": rep.pos_rate, "neg_rate": rep.neg_rate,
    }
    write_keyvalue(report, out / "verify.txt")
    print(f"depth {net.depth}, width {net.width}: positives {rep.pos_correct}/{rep.pos_total}, "
          f"negatives {rep.neg_correct}/{rep.neg_total}, band skipped {rep.boundary_skipped}")
    return EXIT_OK if rep.perfect else EXIT_VERIFY


def cmd_probe(cfg: dict, out) -> int:
    t, k, delta, n = cfg["t"], cfg["k"], cfg["delta"], cfg["n"]
    try:
        curve = make_curve(cfg["curve"], n)
        rep = hardness_probe(t, k, curve, n, delta, cfg["trials"], cfg["seed"], cfg["n_prime"])
    except ThresholdViolated as exc:
        T = threshold(t, k, delta)
        print(f"precondition failed: n > n' > log(4*t*k^2/delta)/log(3/2) "
              f"= log(4*{t}*{k}^2/{delta})/log(1.5) = {T:.6f} ({exc})", file=sys.stderr)
        return EXIT_PROBE
    out = _prepare(out)
    _save_config(cfg, out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "grad_w_max", "grad_b_max", "init_error", "affine_ok"])
    for r in rep.rows:
        w.writerow([r.seed, format(r.grad_w_max, ".17g"), format(r.grad_b_max, ".17g"),
                    format(r.init_error, ".17g"), int(r.affine_ok)])
    (out / "probe.csv").write_text(buf.getvalue(), encoding="utf-8")
    write_keyvalue(rep.summary(), out / "probe_summary.txt")
    print(f"n'={rep.n_prime}: fraction meeting all bounds {rep.frac_all:.4f} (target {1 - delta:.4f})")
    return EXIT_OK


@dataclass(frozen=True)
class SweepCell:
    depth: int
    width: int
    lr: float
    seed: int


_WORKER = {}


def _worker_init(train_data, test_data, cfg):
    _WORKER.update(train=train_data, test=test_data, cfg=cfg)


def _run_cell(cell: SweepCell):
    cfg = _WORKER["cfg"]
    train_data, test_data = _WORKER["train"], _WORKER["test"]
    scheme = Uniform(1.0) if cfg["init"] == "uniform" else PaperUniform(0.5)
    start = time.perf_counter()
    try:
        widths = [train_data.X.shape[1]] + [cell.width] * cell.depth + [1]
        tc = TrainConfig(optimizer=cfg["optimizer"], lr=cell.lr, batch_size=cfg["batch_size"],
                         steps=cfg["steps"], eval_every=cfg["eval_every"], seed=cell.seed)
        res = train(train_data, widths, scheme, tc, test_data)
        return cell, res.best_accuracy, res.best_step, time.perf_counter() - start, ""
    except Exception as exc:  # recorded per cell, the sweep carries on
        return cell, float("nan"), 0, time.perf_counter() - start, f"{type(exc).__name__}: {exc}"


def sweep_cells(cfg: dict) -> list[SweepCell]:
    return [SweepCell(d, w, lr, cfg["seed"] + i)
            for d in cfg["depth"] for w in cfg["width"] for lr in cfg["lr"]
            for i in range(cfg["seeds"])]


def run_sweep(cfg: dict, jobs: int = 1):
    """Train every cell of the grid; returns ``[(cell, acc, best_step, seconds, error), ...]``."""
    dist = make_distribution(cfg)
    train_data = sample_dataset(dist, cfg["train_size"], cfg["seed"])
    test_data = sample_dataset(dist, cfg["test_size"], cfg["seed"] + 1)
    cells = sweep_cells(cfg)
    if jobs <= 1:
        _worker_init(train_data, test_data, cfg)
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                             initargs=(train_data, test_data, cfg)) as pool:
        return list(pool.map(_run_cell, cells))


def aggregate(results) -> list[dict]:
    """Per (depth, width): seed mean and sd at the learning rate with the best mean."""
    groups: dict = {}
    for cell, acc, *_ in results:
        groups.setdefault((cell.depth, cell.width), {}).setdefault(cell.lr, []).append(acc)
    rows = []
    for (depth, width), by_lr in sorted(groups.items()):
        best_lr, best = None, None
        for lr, accs in sorted(by_lr.items(), reverse=True):
            accs = [a for a in accs if a == a]
            if not accs:
                continue
            mean = statistics.fmean(accs)
            if best is None or mean > best[0]:
                sd = statistics.stdev(accs) if len(accs) > 1 else 0.0
                best_lr, best = lr, (mean, sd, len(accs))
        if best is None:
            rows.append(dict(depth=depth, width=width, lr=float("nan"), mean=float("nan"),
                             sd=float("nan"), seeds=0))
        else:
            rows.append(dict(depth=depth, width=width, lr=best_lr, mean=best[0], sd=best[1],
                             seeds=best[2]))
    return rows


def cmd_sweep(cfg: dict, out, jobs: int = 1) -> int:
    out = _prepare(out)
    _save_config(cfg, out)
    results = run_sweep(cfg, jobs)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["depth", "width", "lr", "seed", "best_accuracy", "best_step", "steps",
                    "seconds", "error"])
        for cell, acc, step, secs, err in results:
            w.writerow([cell.depth, cell.width, format(cell.lr, "g"), cell.seed,
                        format(acc, ".6f"), step, cfg["steps"], format(secs, ".2f"), err])
    with open(out / "sweep_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["depth", "width", "best_lr", "mean_accuracy", "sd_accuracy", "seeds"])
        for row in aggregate(results):
            w.writerow([row["depth"], row["width"], format(row["lr"], "g"),
                        format(row["mean"], ".6f"), format(row["sd"], ".6f"), row["seeds"]])
    print(f"{len(results)} runs written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_regions(cfg: dict, out, net_file=None) -> int:
    net_file = net_file or cfg["net_file"]
    if net_file:
        net = load_net(net_file)
    else:
        ifs = builtin_ifs(cfg["fractal"])
        if ifs.dim != 1:
            raise ConfigError("regions needs a 1-D fractal or a net file")
        net = build_exact_classifier(ifs, cfg["n"], cfg["gamma"])
    pwl = extract_pwl_1d(net)
    regions, crossings = count_regions_and_crossings(pwl)
    out = _prepare(out)
    _save_config(cfg, out)
    (out / "regions.csv").write_text(
        f"pieces,regions,sign_changes\n{pwl.num_pieces},{regions},{crossings}\n", encoding="utf-8")
    print(f"{regions} linear regions, {crossings} sign changes on [0, 1]")
    return EXIT_OK


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


CONFIG_ERRORS = (ConfigError, UnknownName, UnknownPreset, MarginTooLarge, GainTooSmall)
