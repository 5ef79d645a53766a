"""Command-line front end: ``mcnls run|verify|groundstate|decompose|transform|norms``.

Configuration precedence is command line > config file > scenario defaults.
The config file is INI (``[scenario]``, ``[grid]``, ``[solver]`` sections, any
key of ScenarioConfig).  Output goes under --output-dir, else the file's
output_dir, else $MCNLS_OUTPUT_DIR, else ./mcnls-out.

Exit status: 0 success, 1 scenario/criterion failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("mcnls")

ENV_OUTPUT = "MCNLS_OUTPUT_DIR"
CONFIG_SECTIONS = ("scenario", "grid", "solver", "extraction", "run")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- serialization


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        return float(o)
    return o


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def versions() -> dict:
    import scipy

    return {"mcnls": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


# ---------------------------------------------------------------- config


def read_config_file(path) -> dict:
    from .scenarios import ScenarioConfig

    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep "L" distinct from a lowercase key
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    known = {name.lower(): name for name in ScenarioConfig.__dataclass_fields__}
    known["name"] = "scenario"
    out = {}
    for sec in cp.sections():
        if sec not in CONFIG_SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in cp[sec].items():
            field = known.get(key.lower().replace("-", "_"))
            if field is None:
                raise ConfigError(f"unknown config key {key!r} in [{sec}]")
            out[field] = _coerce(field, raw)
    return out


_INT_KEYS = {"dim", "n", "mu", "max_profiles", "seed", "jobs"}
_STR_KEYS = {"scenario", "dt_policy", "output_dir"}


def _coerce(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _STR_KEYS:
            return raw.strip()
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {raw!r}") from e


def output_root(cli_value, file_value) -> Path:
    return Path(cli_value or file_value or os.environ.get(ENV_OUTPUT) or "mcnls-out")


# ---------------------------------------------------------------- plots


def _plots(outdir: Path, res, cfg) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    made = []
    tr = res.trajectory
    if tr is not None and tr.grid.dim == 1:
        fig, ax = plt.subplots(figsize=(7, 4))
        ext = [tr.grid.x_axis[0], tr.grid.x_axis[-1], tr.times[0], tr.times[-1]]
        im = ax.imshow(np.abs(tr.values), aspect="auto", origin="lower", extent=ext, cmap="magma")
        fig.colorbar(im, ax=ax, label="|u|")
        ax.set_xlabel("x")
        ax.set_ylabel("t")
        ax.set_title(f"{cfg.scenario}: |u(t,x)|")
        fig.savefig(outdir / "heatmap.png", dpi=100)
        plt.close(fig)
        made.append("heatmap.png")
    elif tr is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.imshow(np.abs(tr.values[-1]), origin="lower", cmap="magma")
        ax.set_title(f"{cfg.scenario}: |u| at t={tr.times[-1]:.3g}")
        fig.savefig(outdir / "final.png", dpi=100)
        plt.close(fig)
        made.append("final.png")
    if tr is not None and len(tr.times) > 1:
        from .propagator import blowup_monitor

        m = res.monitor if res.monitor is not None else blowup_monitor(tr, eta_ref=cfg.eta_ref).to_json()
        fig, axs = plt.subplots(1, 3, figsize=(11, 3.2))
        axs[0].semilogy(m["t"], m["N"], drawstyle="steps-post")
        axs[0].set_title("N(t)")
        axs[1].plot(tr.times, tr.masses())
        axs[1].set_title("mass")
        axs[2].plot(m["t"], m["max_amplitude"])
        axs[2].set_title("peak |u|")
        for a in axs:
            a.set_xlabel("t")
        fig.tight_layout()
        fig.savefig(outdir / "monitor.png", dpi=100)
        plt.close(fig)
        made.append("monitor.png")
    for name, (header, rows) in res.tables.items():
        if len(header) < 2 or not rows or name == "timeseries":
            continue
        arr = np.array(rows, dtype=float)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for k in range(1, arr.shape[1]):
            ax.plot(arr[:, 0], arr[:, k], marker="o", label=header[k])
        if np.all(arr[:, 1:] > 0):
            ax.set_yscale("log")
        if np.all(arr[:, 0] > 0) and arr[:, 0].max() / arr[:, 0].min() > 50:
            ax.set_xscale("log")
        ax.set_xlabel(header[0])
        ax.legend(fontsize=7)
        ax.set_title(f"{cfg.scenario}: {name}")
        fig.tight_layout()
        fig.savefig(outdir / f"{name}.png", dpi=100)
        plt.close(fig)
        made.append(f"{name}.png")
    return made


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    from .grid import write_field
    from .propagator import save_trajectory
    from .scenarios import SCENARIOS, resolve, run

    file_vals = {}
    if args.from_manifest:
        file_vals = json.loads(Path(args.from_manifest).read_text())["config"]
    if args.config:
        file_vals.update(read_config_file(args.config))
    name = args.scenario or file_vals.get("scenario")
    if name is None:
        raise ConfigError("no scenario given")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    cli_vals = {k: getattr(args, k) for k in ("dim", "n", "L", "mu", "dt", "dt_policy", "store_every", "t_start", "t_end", "eta_ref", "seed", "jobs", "max_profiles")}
    root = output_root(args.output_dir, file_vals.get("output_dir"))
    cli_vals["output_dir"] = str(root)
    try:
        cfg = resolve(name, file_vals, cli_vals)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e
    np.random.seed(cfg.seed)
    outdir = root / cfg.scenario
    outdir.mkdir(parents=True, exist_ok=True)
    log.info("running %s -> %s", cfg.scenario, outdir)
    res = run(cfg)

    artifacts = []
    for tname, (header, rows) in res.tables.items():
        write_csv(outdir / f"{tname}.csv", header, rows)
        artifacts.append(f"{tname}.csv")
    for sname, f in res.snapshots.items():
        write_field(outdir / f"{sname}.mcnl", f)
        artifacts.append(f"{sname}.mcnl")
    if res.extra_json:
        for k, v in res.extra_json.items():
            dump_json(v, outdir / f"{k}.json")
            artifacts.append(f"{k}.json")
    if res.trajectory is not None:
        save_trajectory(outdir / "trajectory.npz", res.trajectory)
        artifacts.append("trajectory.npz")
    if not args.no_plots:
        artifacts += _plots(outdir, res, cfg)
    manifest = {
        "scenario": cfg.scenario,
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "versions": versions(),
        "metrics": res.metrics,
        "assertions": [a.to_json() for a in res.assertions],
        "failures": res.failures,
        "status": "pass" if res.ok else "fail",
        "artifacts": sorted(artifacts + ["manifest.json"]),
    }
    if res.trajectory is not None:
        manifest["trajectory"] = res.trajectory.manifest()
    dump_json(manifest, outdir / "manifest.json")
    for a in res.assertions:
        print(f"[{'PASS' if a.passed else 'FAIL'}] {a.name}: {a.value}")
    if not res.ok:
        print(json.dumps(_jsonable({"failures": res.failures})), file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    from .acceptance import canonical, check_resolution, run_all

    try:
        check_resolution(args.n)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    results = run_all(args.seed, jobs=args.jobs, echo=print, n=args.n)
    failed = [r.id for r in results if not r.passed]
    summary = {"seed": args.seed, "n": args.n, "passed": len(results) - len(failed), "failed": failed, "criteria": [r.report() for r in results]}
    if args.report:
        dump_json(summary, args.report)
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def cmd_groundstate(args) -> int:
    from .grid import make_grid
    from .groundstate import petviashvili_solve

    try:
        g = make_grid(args.dim, args.n, args.L)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    Q = petviashvili_solve(g, tol=args.tol, max_iter=args.max_iter)
    Q.export(args.out)
    print(json.dumps({"d": Q.dim, "mass": Q.mass, "residual": Q.residual, "iterations": Q.iterations}))
    return 0


def cmd_decompose(args) -> int:
    from .grid import read_field, write_field
    from .profiles import default_templates, decoupling_check, extract_profiles, extract_profiles_radial, orthogonality_report

    u = read_field(args.snapshot)
    fn = extract_profiles_radial if args.radial else extract_profiles
    dec = fn(u, args.max_profiles, args.mass_floor)
    rep = dec.to_json(default_templates(u.grid, True))
    rep["decoupling_check"] = decoupling_check(dec, u)
    rep["orthogonality"] = orthogonality_report(dec).to_json()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(rep, out / "decomposition.json")
    write_field(out / "remainder.mcnl", dec.remainder)
    for j, p in enumerate(dec.profiles):
        write_field(out / f"profile_{j}.mcnl", p.phi)
    print(f"{len(dec.profiles)} profiles, decoupling_defect={dec.decoupling_defect:.3e}")
    return 0


def cmd_transform(args) -> int:
    from .grid import read_field, write_field
    from .symmetry import EnlargedElement, GroupElement, apply_enlarged

    f = read_field(args.snapshot)
    d = f.grid.dim
    vec = lambda v: tuple(v) if len(v) == d else (v[0],) * d  # noqa: E731
    g = EnlargedElement(GroupElement(args.theta, vec(args.xi0), vec(args.x0), args.lam), args.t0)
    out = apply_enlarged(g, f)
    write_field(args.out, out)
    print(json.dumps({"element": g.to_json(), "aliasing": out.meta.get("aliasing", 0.0), "diverged": out.diverged}))
    return 0


def cmd_norms(args) -> int:
    from .grid import lp_norm, mass, read_field
    from .propagator import load_trajectory, scattering_size

    rows = []
    for path in args.files:
        if str(path).endswith(".npz"):
            tr = load_trajectory(path)
            m = tr.masses()
            rows.append({"file": str(path), "kind": "trajectory", "mass_first": m[0], "mass_last": m[-1], "S": scattering_size(tr), f"L{args.p:g}_spacetime": tr.spacetime_norm(args.p)})
        else:
            f = read_field(path)
            rows.append({"file": str(path), "kind": "snapshot", "mass": mass(f), f"L{args.p:g}": lp_norm(f, args.p)})
    print(json.dumps(_jsonable(rows), indent=2))
    return 0


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2, as argparse does, but keep one message style
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    from .acceptance import DEFAULT_SEED
    from .scenarios import SCENARIOS

    p = _Parser(prog="mcnls", description="Mass-critical NLS numerical laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario and write its artifact tree")
    r.add_argument("scenario", nargs="?", help=" | ".join(SCENARIOS))
    r.add_argument("--config", help="INI config file")
    r.add_argument("--from-manifest", help="re-run the configuration recorded in a manifest.json")
    r.add_argument("--output-dir")
    r.add_argument("--dim", type=int)
    r.add_argument("--n", type=int)
    r.add_argument("--L", type=float)
    r.add_argument("--mu", type=int, choices=(-1, 0, 1))
    r.add_argument("--dt", type=float)
    r.add_argument("--dt-policy", choices=("fixed", "adaptive"))
    r.add_argument("--store-every", type=float)
    r.add_argument("--t-start", type=float)
    r.add_argument("--t-end", type=float)
    r.add_argument("--eta-ref", type=float)
    r.add_argument("--max-profiles", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--n", type=int, default=512, help="base resolution of the 1d criteria (>= 512)")
    v.add_argument("--report", help="write the JSON summary here")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("groundstate", help="solve for Q and export it")
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--n", type=int, default=512)
    g.add_argument("--L", type=float, default=16.0)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--max-iter", type=int, default=500)
    g.add_argument("--out", default="Q.mcnl")
    g.set_defaults(func=cmd_groundstate)

    d = sub.add_parser("decompose", help="extract linear profiles from a snapshot")
    d.add_argument("snapshot")
    d.add_argument("--max-profiles", type=int, default=8)
    d.add_argument("--mass-floor", type=float)
    d.add_argument("--radial", action="store_true")
    d.add_argument("--out", default="decomposition")
    d.set_defaults(func=cmd_decompose)

    t = sub.add_parser("transform", help="apply an (enlarged) group element to a snapshot")
    t.add_argument("snapshot")
    t.add_argument("--theta", type=float, default=0.0)
    t.add_argument("--xi0", type=float, nargs="+", default=[0.0])
    t.add_argument("--x0", type=float, nargs="+", default=[0.0])
    t.add_argument("--lam", type=float, default=1.0)
    t.add_argument("--t0", type=float, default=0.0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_transform)

    n = sub.add_parser("norms", help="mass, L^p and scattering size of snapshot (.mcnl) or trajectory (.npz) files")
    n.add_argument("files", nargs="+")
    n.add_argument("--p", type=float, default=6.0)
    n.set_defaults(func=cmd_norms)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"mcnls: configuration error: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"mcnls: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
