"""Command line: ``obstacle1d run | list-demos | emit-plot-data``.

Exit codes: 0 success, 2 config error or unknown demo, 3 hypothesis or
data validation failure, 4 solver non-convergence, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .config import ScenarioConfig, load_config, parse_config
from .errors import ConfigError, HypothesisViolation, MMatrixError, NonConvergenceError, ObstacleError

OUT_ENV = "OBSTACLE1D_OUT"
DEFAULT_OUT = "obstacle1d_out"

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4, 5


def demo_dir():
    return resources.files("obstacle1d") / "demos"


def demo_names() -> list:
    return sorted(p.name[:-4] for p in demo_dir().iterdir() if p.name.endswith(".cfg"))


def demo_summary(name: str) -> str:
    for line in (demo_dir() / f"{name}.cfg").read_text().splitlines():
        if line.startswith("#"):
            return line.lstrip("# ").strip()
    return ""


def resolve(target: str) -> ScenarioConfig:
    """Config file, run manifest (``.json``) or packaged demo name."""
    path = Path(target)
    if path.suffix == ".json" and path.exists():
        try:
            man = json.loads(path.read_text())
            return parse_config(man["config"], man["scenario"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{target}: not a run manifest ({exc})") from exc
    if path.exists():
        return load_config(path)
    if os.sep not in target and "/" not in target:
        name = target[:-4] if target.endswith(".cfg") else target
        if name in demo_names():
            return parse_config((demo_dir() / f"{name}.cfg").read_text(), name)
        raise ConfigError(f"unknown demo {name!r}; available: {', '.join(demo_names())}")
    raise FileNotFoundError(f"config {target} not found")


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NonConvergenceError):
        return EXIT_SOLVER
    if isinstance(exc, (HypothesisViolation, MMatrixError, ObstacleError)):
        return EXIT_HYPOTHESIS
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def _run_one(target: str, root: str) -> tuple:
    """Worker: returns ``(target, exit code, message)``."""
    from .runner import run_scenario

    try:
        cfg = resolve(target)
        sub = cfg.text_value("output", "dir", cfg.name)
        man = run_scenario(cfg, Path(root) / sub)
        return target, EXIT_OK, f"{cfg.name}: {len(man['outputs'])} files in {Path(root) / sub}"
    except (ObstacleError, OSError) as exc:
        return target, exit_code(exc), f"{target}: {type(exc).__name__}: {exc}"


def cmd_run(args) -> int:
    root = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    if args.jobs > 1 and len(args.configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, args.configs, [root] * len(args.configs)))
    else:
        results = [_run_one(c, root) for c in args.configs]
    code = EXIT_OK
    for _, rc, msg in results:
        print(msg, file=sys.stdout if rc == EXIT_OK else sys.stderr)
        code = code or rc
    return code


def cmd_list_demos(args) -> int:
    for name in demo_names():
        print(f"{name:18s} {demo_summary(name)}")
    return EXIT_OK


# columns picked by each plot kind; None means all numeric columns
PLOT_KINDS = {
    "profile": ["xi", "V"],
    "ladder": ["eps", "defect"],
    "boundary": ["x", "t"],
    "exercise": ["tau", "s_star"],
    "energy": ["t", "E"],
    "classification": ["x", "t", "E0"],
    "smoothfit": None,
    "field": ["x", "t", "u"],
    "portrait": None,
}
# kinds laid out as gnuplot surface blocks (blank line between time levels)
BLOCKED = {"field": "t", "portrait": "t"}


def _read_rows(path: Path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise ConfigError(f"{path}: empty CSV")
    return header, [r for r in reader if r]


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def plot_data(path: Path, kind: str) -> str:
    """Whitespace-separated columns with a ``#`` header, ready for gnuplot."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose one of {', '.join(PLOT_KINDS)}")
    header, rows = _read_rows(path)
    cols = PLOT_KINDS[kind]
    if cols is None:
        cols = [h for k, h in enumerate(header) if rows and _is_number(rows[0][k])]
    missing = [c for c in cols if c not in header]
    if missing:
        raise ConfigError(f"{path}: kind {kind!r} needs column(s) {', '.join(missing)}; found {', '.join(header)}")
    idx = [header.index(c) for c in cols]
    block = header.index(BLOCKED[kind]) if kind in BLOCKED else None
    out = ["# " + " ".join(cols)]
    prev = None
    for r in rows:
        if block is not None and prev is not None and r[block] != prev:
            out.append("")
        prev = r[block] if block is not None else None
        out.append(" ".join(r[k] for k in idx))
    return "\n".join(out) + "\n"


def cmd_emit(args) -> int:
    text = plot_data(Path(args.csv), args.kind)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstacle1d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run scenario configs, manifests or demo names")
    r.add_argument("configs", nargs="+", metavar="cfg")
    r.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    r.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
    r.set_defaults(func=cmd_run)
    d = sub.add_parser("list-demos", help="list packaged demo scenarios")
    d.set_defaults(func=cmd_list_demos)
    e = sub.add_parser("emit-plot-data", help="convert an output CSV to gnuplot columns")
    e.add_argument("csv")
    e.add_argument("kind", help=", ".join(PLOT_KINDS))
    e.add_argument("-o", "--output", help="write here instead of stdout")
    e.set_defaults(func=cmd_emit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except (ObstacleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
