"""``ftlab`` command line: verify, run, plotdata, concat, decode.

Exit codes: 0 success, 1 verification or experiment failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, RunConfig, dump_config, load_config
from .errors import ConfigurationError, InsufficientDataError, NoConvergenceError
from .pauli import codeword_parity, hamming_correct

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
RATE_COLUMNS = ("rounds", "p_per_round")


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    circuit_hashes: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    files: list[str] = field(default_factory=list)
    failed: list[str] = field(default_factory=list)

    def missing(self) -> list[str]:
        return [f for f in self.files if not Path(f).is_file() or Path(f).stat().st_size == 0]

    def write(self, path: Path) -> Path:
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")
        return path


# ---------------------------------------------------------------------------
# helpers


def _write_csv(path: Path, rows: list[dict], columns) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in columns})
    return path


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")
    return path


def _memory_experiment(cfg: ExperimentConfig, **over):
    from .threshold import MemoryExperiment

    kw = dict(input=cfg.input, rounds=cfg.rounds, noise=cfg.noise.model(), shots=cfg.shots, seed=cfg.seed,
              backend=cfg.backend, code=cfg.code, schedule=cfg.schedule, max_retries=cfg.max_retries,
              chunk_size=cfg.chunk_size, error_timing=cfg.error_timing)
    kw.update(over)
    return MemoryExperiment(**kw)


def _row_with_rate(r) -> dict:
    row = r.row()
    row["p_per_round"] = r.p_per_round
    row["rounds"] = r.rounds
    return row


# ---------------------------------------------------------------------------
# experiments


def run_experiment(cfg: ExperimentConfig, out: Path, workers: int = 1, progress: bool = True):
    """Run one configured experiment; returns ``(files, circuit_hashes, ok)``."""
    from . import plotting
    from .threshold import CSV_COLUMNS, adversary_compare, coherent_collapse, fit_threshold, memory_sweep

    name = cfg.label
    files: list[Path] = []
    hashes: set[str] = set()
    ok = True
    summary: dict = {"kind": cfg.kind, "normalization": "logical failures per memory window; "
                     "p_per_round assumes independent rounds"}
    sweep_kw = dict(min_failures=cfg.min_failures, max_shots=cfg.max_shots, workers=workers, progress=progress)

    if cfg.kind in ("memory", "threshold-sweep"):
        res = memory_sweep(_memory_experiment(cfg), cfg.p_grid, **sweep_kw)
        rows = [_row_with_rate(r) for r in res]
        hashes.update(r.circuit_hash for r in res)
        files.append(_write_csv(out / f"{name}.csv", rows, CSV_COLUMNS + RATE_COLUMNS))
        summary["results"] = rows
        fit = None
        if cfg.kind == "threshold-sweep":
            try:
                f = fit_threshold(list(zip(cfg.p_grid, res)))
                fit = f.to_dict()
                summary["fit"] = fit
            except InsufficientDataError as err:
                summary["fit_error"] = str(err)
                ok = False
        if cfg.output.figures:
            files += plotting.write_plotdata(rows, out, name, fit)

    elif cfg.kind == "level1":
        base = _memory_experiment(cfg)
        flat = memory_sweep(base.replace(code="steane"), cfg.p_grid, **sweep_kw)
        conc = memory_sweep(base.replace(code="concat"), cfg.p_grid, **sweep_kw)
        rows_f = [_row_with_rate(r) for r in flat]
        rows_c = [_row_with_rate(r) for r in conc]
        hashes.update(r.circuit_hash for r in flat + conc)
        files.append(_write_csv(out / f"{name}_steane.csv", rows_f, CSV_COLUMNS + RATE_COLUMNS))
        files.append(_write_csv(out / f"{name}_concat.csv", rows_c, CSV_COLUMNS + RATE_COLUMNS))
        comp = []
        for a, b in zip(flat, conc):
            sd = float(np.hypot(a.sigma, b.sigma))
            z = (a.p_logical - b.p_logical) / sd if sd else 0.0
            comp.append({"p": a.p, "steane": a.p_logical, "concat": b.p_logical, "z_gain": z,
                         "verdict": "gain" if z > 3 else ("loss" if z < -3 else "inconclusive")})
        summary.update(steane=rows_f, concat=rows_c, comparison=comp)
        if cfg.output.figures:
            files.append(plotting.plot_rates(rows_f, out / f"{name}.png", label="one block (7 qubits)",
                                             extra={"two levels (49 qubits)": rows_c}))

    elif cfg.kind == "coherent-collapse":
        rows = []
        for i, th in enumerate(cfg.thetas):
            r = coherent_collapse(th, cfg.shots, cfg.seed + i)
            rows.append({"theta": th, "shots": r.shots, "nontrivial": r.nontrivial, "rate": r.rate,
                         "expected": r.expected, "z_score": r.z_score, "corrected_fidelity": r.corrected_fidelity,
                         "collapse_fidelity": r.collapse_fidelity, "branches": r.branches, "seed": cfg.seed + i})
        files.append(_write_csv(out / f"{name}.csv", rows, list(rows[0])))
        summary["results"] = rows
        if cfg.output.figures:
            files.append(plotting.plot_coherent(rows, out / f"{name}.png"))

    elif cfg.kind == "adversary-compare":
        rows, comp = [], []
        for i, p in enumerate(cfg.p_grid):
            c = adversary_compare(p, cfg.shots, cfg.seed + i, max_locations=cfg.max_locations, rounds=cfg.rounds,
                                  workers=workers)
            for strategy, r in (("exhaustive", c.adversarial), ("depolarizing", c.depolarizing)):
                rows.append({**r.row(), "strategy": strategy})
                hashes.add(r.circuit_hash)
            comp.append({"p": p, "z_adv_minus_dep": c.z_score, "fallbacks": c.fallbacks,
                         "locations": c.n_locations})
        files.append(_write_csv(out / f"{name}.csv", rows, list(CSV_COLUMNS) + ["strategy"]))
        summary.update(results=rows, comparison=comp)
        if cfg.output.figures:
            adv = [r for r in rows if r["strategy"] == "exhaustive"]
            dep = [r for r in rows if r["strategy"] == "depolarizing"]
            files.append(plotting.plot_rates(adv, out / f"{name}.png", label="exhaustive adversary",
                                             extra={"depolarizing": dep}))

    files.insert(1, _write_json(out / f"{name}.json", summary))
    return files, sorted(h for h in hashes if h), ok


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suites

    names = args.suite or list(SUITES)
    try:
        results = run_suites(names)
    except KeyError as err:
        print(f"error: {err.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}" + ("" if r.passed else f": {'; '.join(r.failures[:5])}"))
    n_bad = sum(not r.passed for r in results)
    print(f"{len(results) - n_bad}/{len(results)} suites passed, {n_bad} failure(s)")
    return EXIT_OK if n_bad == 0 else EXIT_FAIL


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = RunConfig.model_validate(
                {"experiments": [{**e.model_dump(), "seed": args.seed} for e in cfg.experiments]})
    except ConfigurationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.time()
    manifest = RunManifest(config=json.loads(json.dumps(cfg.model_dump(mode="json"))))
    out_root = None
    for e in cfg.experiments:
        out = Path(args.out_dir or e.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        out_root = out_root or out
        try:
            files, hashes, ok = run_experiment(e, out, workers=args.workers, progress=not args.quiet)
        except ConfigurationError as err:
            print(f"config error in {e.label}: {err}", file=sys.stderr)
            return EXIT_CONFIG
        except (InsufficientDataError, NoConvergenceError, RuntimeError) as err:
            print(f"experiment {e.label} failed: {err}", file=sys.stderr)
            manifest.failed.append(e.label)
            continue
        manifest.files += [str(f) for f in files]
        manifest.circuit_hashes += [h for h in hashes if h not in manifest.circuit_hashes]
        if not ok:
            print(f"experiment {e.label} incomplete: see {e.label}.json", file=sys.stderr)
            manifest.failed.append(e.label)
        for f in files:
            print(f)
    (out_root / "config.yaml").write_text(dump_config(cfg))
    manifest.files.append(str(out_root / "config.yaml"))
    manifest.wall_clock_s = round(time.time() - t0, 3)
    path = manifest.write(out_root / "manifest.json")
    print(path)
    if manifest.missing():
        print(f"missing outputs: {manifest.missing()}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_FAIL if manifest.failed else EXIT_OK


def cmd_plotdata(args) -> int:
    from . import plotting

    csv_path = Path(args.csv)
    try:
        rows = plotting.read_results_csv(csv_path)
    except (OSError, ConfigurationError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    fit = plotting.load_fit(args.fit) if args.fit else plotting.load_fit(csv_path.with_suffix(".json"))
    out = Path(args.out_dir) if args.out_dir else csv_path.parent
    for p in plotting.write_plotdata(rows, out, csv_path.stem + "_plot", fit, png=not args.no_png):
        print(p)
    return EXIT_OK


def cmd_concat(args) -> int:
    from .threshold import concat_project, levels_for_target

    if args.p <= 0 or args.pt <= 0:
        print("error: p and p_T must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.epsilon is not None:
        try:
            depth, _ = levels_for_target(args.p, args.pt, args.epsilon)
        except NoConvergenceError as err:
            print(f"error: above threshold: {err}", file=sys.stderr)
            return EXIT_CONFIG
        except ConfigurationError as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        ks = range(0, 1) if depth == 0 else range(1, depth + 1)
    else:
        if args.k < 0:
            print("error: k must be >= 0", file=sys.stderr)
            return EXIT_CONFIG
        ks = range(0, 1) if args.k == 0 else range(1, args.k + 1)
    print("k,p_k,qubits")
    for k in ks:
        pr = concat_project(args.p, args.pt, k)
        print(f"{k},{pr.p_k:.6g},{pr.qubits_per_logical}")
    return EXIT_OK


def cmd_decode(args) -> int:
    w = args.word.strip()
    if len(w) != 7 or set(w) - {"0", "1"}:
        print("error: --word needs exactly 7 bits", file=sys.stderr)
        return EXIT_CONFIG
    fixed, pos = hamming_correct(w)
    fixed_s = "".join(str(int(b)) for b in fixed)
    print(f"word={w} corrected={fixed_s} flipped_position={pos or 'none'} parity={codeword_parity(fixed)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the seed of every experiment")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--out-dir", default=None, help="output directory")

    ap = argparse.ArgumentParser(prog="ftlab", description="Steane-code fault-tolerance laboratory")
    ap.add_argument("--version", action="version", version=f"ftlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the deterministic self-check suites")
    v.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", parents=[common], help="run the experiments of a YAML config")
    r.add_argument("config")
    r.add_argument("--quiet", action="store_true", help="no progress bars")
    r.set_defaults(func=cmd_run)

    pd = sub.add_parser("plotdata", parents=[common], help="gnuplot data, script and PNG for a result CSV")
    pd.add_argument("csv")
    pd.add_argument("--fit", default=None, help="JSON holding a fit (default: the CSV's sibling .json)")
    pd.add_argument("--no-png", action="store_true")
    pd.set_defaults(func=cmd_plotdata)

    c = sub.add_parser("concat", parents=[common], help="levels, rates and qubit counts of concatenation")
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--pt", type=float, required=True)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--epsilon", type=float)
    c.set_defaults(func=cmd_concat)

    d = sub.add_parser("decode", parents=[common], help="Hamming-correct a 7-bit word")
    d.add_argument("--word", required=True)
    d.set_defaults(func=cmd_decode)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
