"""Config-driven experiment runner.

    gaugelab <flow|ns|adiabatic|estimates|charge|report>
             --config <path> [--seed N] [--out DIR] [--workers K]

Configs are JSON. Flags override config keys. Every artifact file name
carries the fingerprint of the canonicalized config; reruns with the same
config and seed are byte-identical except for the run manifest, which is
the only place timestamps appear. Exit codes: 0 success, 2 config error,
3 numerical failure (a structured error JSON is written).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import adiabatic, algebra, elliptic, estimates, mesh, nsflow
from .connection import (Connection, TwistSpec, build_twisted_reference,
                         chern_simons, curvature, topological_charge,
                         trivial_reference)
from .mesh import Cochain, GridSpec, hodge_weights

__all__ = ["main", "run", "ConfigError"]

SUBCOMMANDS = ("flow", "ns", "adiabatic", "estimates", "charge", "report")


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


# ----------------------------------------------------------- config layer

def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def canonicalize(cfg: dict) -> dict:
    """Config as hashed: everything except the output directory."""
    return {k: v for k, v in cfg.items() if k != "out"}


def config_fingerprint(cfg: dict) -> str:
    return estimates.fingerprint(canonicalize(cfg))


def _require(cfg: dict, key: str, typ=None):
    if key not in cfg:
        raise ConfigError(f"missing config key '{key}'")
    val = cfg[key]
    if typ is not None and not isinstance(val, typ):
        raise ConfigError(f"config key '{key}' has wrong type")
    return val


def _grid(cfg: dict) -> GridSpec:
    g = _require(cfg, "grid", dict)
    dims = tuple(int(d) for d in _require(g, "dims", list))
    spacing = tuple(float(h) for h in _require(g, "spacing", list))
    blocks = tuple(str(b) for b in _require(g, "blocks", list))
    if not len(dims) == len(spacing) == len(blocks):
        raise ConfigError("grid dims/spacing/blocks lengths differ")
    try:
        return GridSpec(dims, spacing, blocks)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid: {exc}") from None


def _connection(cfg: dict, seed: int) -> Connection:
    preset = cfg.get("preset", "random")
    if preset == "winding":
        return adiabatic.make_winding_representative(
            int(cfg.get("n_cells", 8)), float(cfg.get("length", 1.0)),
            tuple(cfg.get("windings", (2, 2))))
    if preset == "holomorphic":
        return adiabatic.make_holomorphic_representative(
            int(cfg.get("n_cells", 8)), float(cfg.get("length", 1.0)),
            tuple(cfg.get("windings", (2, 2))),
            float(cfg.get("amp", 0.3)))
    if preset == "beltrami":
        return adiabatic.make_beltrami_path(
            int(cfg.get("n_cells", 8)), float(cfg.get("length", 1.0)),
            int(cfg.get("mode", 1)), float(cfg.get("delta", 1e-3)))
    grid = _grid(cfg)
    w = hodge_weights(grid, float(cfg.get("epsilon", 1.0)))
    twist = cfg.get("twist")
    if twist:
        pairs = tuple((tuple(int(a) for a in axes), int(flux))
                      for axes, flux in twist)
        ref = build_twisted_reference(TwistSpec(2, pairs), grid)
    else:
        ref = trivial_reference(grid)
    a = Cochain.zeros(1, grid, 2)
    if preset == "random":
        rng = np.random.default_rng(seed)
        scale = float(cfg.get("scale", 0.05))
        for axes in a.comps:
            a.comps[axes] = algebra.from_coords(
                rng.standard_normal(grid.dims + (3,)) * scale)
    elif preset != "flat":
        raise ConfigError(f"unknown connection preset '{preset}'")
    return Connection(ref, a, w)


# ---------------------------------------------------------- artifact layer

def _fmt(val) -> str:
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, (np.floating, np.integer)):
        return repr(val.item())
    return str(val)


def write_csv(path: Path, header: list, rows: list):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default)
                    + "\n", encoding="utf-8", newline="\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o)}")


def render_line_svg(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """Minimal deterministic SVG line chart. series: name -> (xs, ys)."""
    W, H, ML, MR, MT, MB = 640, 400, 70, 20, 40, 50
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        xs_all = ys_all = [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return ML + (x - x0) / (x1 - x0) * (W - ML - MR)

    def py(y):
        return H - MB - (y - y0) / (y1 - y0) * (H - MT - MB)

    colors = ["#1f6fb2", "#c23b22", "#2e8b57", "#8a2be2", "#b8860b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W // 2}" y="24" text-anchor="middle" '
           f'font-size="15">{title}</text>']
    out.append(f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" '
               'stroke="black"/>')
    out.append(f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" '
               'stroke="black"/>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{px(xv):.1f}" y="{H - MB + 18}" '
                   f'text-anchor="middle" font-size="11">{xv:.4g}</text>')
        out.append(f'<text x="{ML - 6}" y="{py(yv):.1f}" text-anchor="end" '
                   f'font-size="11">{yv:.4g}</text>')
    out.append(f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" '
               f'font-size="12">{xlabel}</text>')
    out.append(f'<text x="18" y="{H // 2}" text-anchor="middle" '
               f'font-size="12" transform="rotate(-90 18 {H // 2})">'
               f'{ylabel}</text>')
    for k, (name, (xs, ys)) in enumerate(sorted(series.items())):
        col = colors[k % len(colors)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" '
                   'stroke-width="1.5"/>')
        out.append(f'<text x="{W - MR - 4}" y="{MT + 16 + 16 * k}" '
                   f'text-anchor="end" font-size="11" fill="{col}">'
                   f'{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------- subcommands

def _run_flow(cfg: dict, seed: int, out: Path, fp: str) -> dict:
    c = _connection(cfg, seed)
    tau_end = float(cfg.get("tau_end", 0.1))
    tol = float(cfg.get("tol", 1e-9))
    if "boundary_axis" in cfg:
        state = nsflow.double_and_flow(c, int(cfg["boundary_axis"]),
                                       tau_end, tol=tol)
    else:
        state = nsflow.ym_flow(c, tau_end, tol=tol)
    rows = [{"tau": t, "energy": e} for t, e in state.energy_history]
    write_csv(out / f"flow_{fp}.csv", ["tau", "energy"], rows)
    result = {"tau": state.tau,
              "final_energy": state.energy_history[-1][1],
              "flat_limit": state.flat_limit,
              "steps": state.step_stats}
    write_json(out / f"flow_{fp}.json", result)
    svg = render_line_svg(
        {"energy": ([r["tau"] for r in rows], [r["energy"] for r in rows])},
        "Yang-Mills flow energy", "tau", "energy")
    (out / f"flow_{fp}.svg").write_text(svg, encoding="utf-8")
    result["artifacts"] = [f"flow_{fp}.csv", f"flow_{fp}.json",
                           f"flow_{fp}.svg"]
    return result


def _run_ns(cfg: dict, seed: int, out: Path, fp: str) -> dict:
    c = _connection(cfg, seed)
    res = nsflow.ns_newton(c, tol=float(cfg.get("tol", 1e-11)))
    cmp = nsflow.orbit_compare(c, res.flat)
    rows = [{"iteration": i, "residual": r}
            for i, r in enumerate(res.residual_history)]
    write_csv(out / f"ns_{fp}.csv", ["iteration", "residual"], rows)
    result = {"iterations": res.iterations,
              "residual": res.curvature_residual,
              "xi_norm": mesh.norm(res.Xi, c.weights),
              "wilson_max_discrepancy": cmp["max_discrepancy"]}
    write_json(out / f"ns_{fp}.json", result)
    result["artifacts"] = [f"ns_{fp}.csv", f"ns_{fp}.json"]
    return result


def _run_adiabatic(cfg: dict, seed: int, out: Path, fp: str) -> dict:
    c0 = _connection(cfg, seed)
    eps_list = [float(e) for e in cfg.get("eps_list", (1.0, 0.5, 0.25))]
    budget = float(cfg.get("budget", 0.1))
    rows = adiabatic.curvature_scaling_probe(
        c0, eps_list, budget, tol=float(cfg.get("tol", 1e-8)),
        match_fraction=float(cfg.get("match_fraction", 0.01)))
    header = ["epsilon", "rho", "sup_F_alpha", "sup_gamma",
              "asd_balance_rel", "inst_energy", "probe_tau",
              "floor_triggered"]
    write_csv(out / f"adiabatic_{fp}.csv", header,
              [{h: r[h] for h in header} for r in rows])
    rhos = [r["rho"] for r in rows]
    band = max(rhos) / max(min(rhos), 1e-300)
    result = {"eps_list": eps_list,
              "rho": rhos,
              "rho_band": band,
              "rho_band_within_x4": band <= 4.0}
    write_json(out / f"adiabatic_{fp}.json", result)
    svg = render_line_svg({"rho": (eps_list, rhos)},
                          "Curvature scaling ratio", "epsilon", "rho")
    (out / f"adiabatic_{fp}.svg").write_text(svg, encoding="utf-8")
    result["artifacts"] = [f"adiabatic_{fp}.csv", f"adiabatic_{fp}.json",
                           f"adiabatic_{fp}.svg"]
    return result


def _estimates_scenario(cfg: dict, seed: int):
    """Standard small 2D scenario shared by the estimate suites."""
    L = int(cfg.get("L", 8))
    grid = GridSpec((L, L), (1.0 / L, 1.0 / L), ("Sigma", "Sigma"))
    w = hodge_weights(grid, 1.0)
    flat = Connection(trivial_reference(grid), Cochain.zeros(1, grid, 2), w)
    rng = np.random.default_rng(seed)

    def rand_cochain(deg, scale=1.0):
        c = Cochain.zeros(deg, grid, 2)
        for axes in c.comps:
            c.comps[axes] = algebra.from_coords(
                rng.standard_normal(grid.dims + (3,)) * scale)
        return c

    return grid, w, flat, rand_cochain


def _run_estimates(cfg: dict, seed: int, out: Path, fp: str) -> dict:
    suite = _require(cfg, "suite", str)
    if suite == "gslemma":
        rep = estimates.gslemma_trials(int(cfg.get("trials", 1000)), seed)
    elif suite == "ns_scaling":
        _, w, flat, rand_cochain = _estimates_scenario(cfg, seed)
        v = rand_cochain(1)
        v = v * (1.0 / mesh.norm(v, w))
        rep = estimates.ns_identity_scaling(
            flat, v, cfg.get("t_list", (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)))
    elif suite == "proj_lipschitz":
        _, w, flat, rand_cochain = _estimates_scenario(cfg, seed)
        v = rand_cochain(1)
        v = v * (1.0 / mesh.norm(v, w))
        alpha = flat.with_deviation(flat.a + 0.02 * v)
        u = rand_cochain(1)
        u = u * (1.0 / mesh.norm(u, w))
        primes = [alpha.with_deviation(alpha.a + t * u)
                  for t in (0.02, 0.01, 0.005, 0.0025, 0.00125)]
        probes = [rand_cochain(1) for _ in range(4)]
        rep = estimates.proj_lipschitz(alpha, primes, probes)
    elif suite == "linearization":
        _, w, flat, rand_cochain = _estimates_scenario(cfg, seed)
        v = rand_cochain(1)
        v = v * (1.0 / mesh.norm(v, w))
        probes = [rand_cochain(1) for _ in range(2)]
        t = float(cfg.get("t", 1e-3))
        rep = estimates.linearization_defect(
            flat.with_deviation(flat.a + t * v), probes)
    elif suite == "complex_linearity":
        grid, w, flat, rand_cochain = _estimates_scenario(cfg, seed)
        v = rand_cochain(1)
        v = v * (1.0 / mesh.norm(v, w))
        alpha = flat.with_deviation(flat.a + float(cfg.get("t", 1e-3)) * v)
        space = elliptic.harmonic_basis(flat, 1)
        probes = [elliptic.unpack(space.basis[:, k], 1, grid, w, 2)
                  for k in range(0, space.dim, 2)]
        rep = estimates.complex_linearity_check(alpha, probes)
    elif suite == "elliptic":
        _, w, flat, rand_cochain = _estimates_scenario(cfg, seed)
        v = rand_cochain(1)
        v = v * (1.0 / mesh.norm(v, w))
        fam = [flat.with_deviation(flat.a + t * v)
               for t in (1e-4, 5e-4, 1e-3, 2e-3)]
        probes = [rand_cochain(1) for _ in range(3)]
        rep = estimates.elliptic_constant_probe(fam, probes)
    elif suite == "bump":
        b = estimates.make_bump(float(cfg.get("core", 0.5)),
                                float(cfg.get("support", 1.0)),
                                int(cfg.get("samples", 512)))
        rep = estimates.EstimateReport(
            name="bump", constants=b.to_dict(), slopes={},
            band={"C0_finite": True}, passed=np.isfinite(b.C0),
            config_fingerprint=fp,
            points=[{"s": float(s), "h": float(h)}
                    for s, h in zip(b.s[::8], b.h[::8])])
    else:
        raise ConfigError(f"unknown estimates suite '{suite}'")
    d = rep.to_dict()
    write_json(out / f"estimates_{suite}_{fp}.json", d)
    artifacts = [f"estimates_{suite}_{fp}.json"]
    if rep.points:
        header = sorted(rep.points[0].keys())
        rows = [p for p in rep.points if sorted(p.keys()) == header]
        write_csv(out / f"estimates_{suite}_{fp}.csv", header, rows)
        artifacts.append(f"estimates_{suite}_{fp}.csv")
    result = {"suite": suite, "passed": rep.passed,
              "constants": rep.constants, "slopes": rep.slopes,
              "artifacts": artifacts}
    return result


def _run_charge(cfg: dict, seed: int, out: Path, fp: str) -> dict:
    c = _connection(cfg, seed)
    result = {}
    if c.grid.ndim == 4:
        result["topological_charge"] = topological_charge(c)
    if c.grid.ndim == 3:
        result["chern_simons"] = chern_simons(c)
    if not result:
        raise ConfigError("charge needs a 3D (CS) or 4D (charge) grid")
    result["curvature_norm"] = mesh.norm(curvature(c), c.weights)
    write_json(out / f"charge_{fp}.json", result)
    write_csv(out / f"charge_{fp}.csv", sorted(result.keys()),
              [result])
    result = dict(result)
    result["artifacts"] = [f"charge_{fp}.json", f"charge_{fp}.csv"]
    return result


def _read_csv(path: Path):
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for line in lines[1:]:
        for h, v in zip(header, line.split(",")):
            try:
                cols[h].append(float(v))
            except ValueError:
                cols[h].append(np.nan)
    return header, cols


def _run_report(cfg: dict, seed: int, out: Path, fp: str) -> dict:
    inputs = cfg.get("inputs")
    if inputs is None:
        inputs = sorted(p.name for p in out.glob("*.csv")
                        if not p.name.startswith("report_"))
    if not inputs:
        raise ConfigError("report: no CSV inputs found")
    made = []
    summary = []
    for src in inputs:
        p = Path(src)
        if not p.is_absolute():
            p = out / p
        if not p.exists():
            raise ConfigError(f"report input missing: {src}")
        header, cols = _read_csv(p)
        xcol = header[0]
        series = {h: (cols[xcol], cols[h]) for h in header[1:]
                  if any(np.isfinite(v) for v in cols[h])}
        name = f"report_{p.stem}_{fp}.svg"
        (out / name).write_text(
            render_line_svg(series, p.stem, xcol, "value"),
            encoding="utf-8")
        made.append(name)
        summary.append({"input": p.name, "rows": len(cols[xcol]),
                        "columns": header})
    write_json(out / f"report_{fp}.json", {"inputs": summary})
    return {"plots": made,
            "artifacts": made + [f"report_{fp}.json"]}


_RUNNERS = {"flow": _run_flow, "ns": _run_ns, "adiabatic": _run_adiabatic,
            "estimates": _run_estimates, "charge": _run_charge,
            "report": _run_report}

NUMERICAL_ERRORS = (nsflow.FlowError, estimates.FDGuardError,
                    np.linalg.LinAlgError, FloatingPointError,
                    RuntimeError, ValueError)


def _run_single(subcommand: str, cfg: dict, out_dir: str) -> int:
    """One experiment: validate, run, emit artifacts and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    fp = config_fingerprint(cfg)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        result = _RUNNERS[subcommand](cfg, seed, out, fp)
    except ConfigError:
        raise
    except NUMERICAL_ERRORS as exc:
        err = {"error_type": type(exc).__name__,
               "message": str(exc),
               "subcommand": subcommand,
               "config_fingerprint": fp,
               "seed": seed}
        write_json(out / f"error_{fp}.json", err)
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 3
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    artifacts = result.pop("artifacts", [])
    manifest = {"subcommand": subcommand,
                "config_fingerprint": fp,
                "seed": seed,
                "started_utc": started,
                "finished_utc": finished,
                "artifacts": artifacts,
                "result": result}
    write_json(out / f"run_{fp}.json", manifest)
    return 0


def _batch_entry(args):
    subcommand, cfg, out_dir = args
    return _run_single(subcommand, cfg, out_dir)


def run(subcommand: str, config_path: str, seed: int = None,
        out: str = None, workers: int = None) -> int:
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    cfg = load_config(config_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["out"] = out
    out_dir = cfg.get("out", "runs")
    if "batch" in cfg:
        entries = cfg["batch"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("'batch' must be a non-empty list of configs")
        jobs = []
        for ent in entries:
            if not isinstance(ent, dict):
                raise ConfigError("batch entries must be objects")
            sub = ent.get("subcommand", subcommand)
            if sub not in SUBCOMMANDS:
                raise ConfigError(f"unknown subcommand '{sub}' in batch")
            e = dict(ent)
            e.pop("subcommand", None)
            if seed is not None:
                e["seed"] = int(seed)
            jobs.append((sub, e, e.get("out", out_dir)))
        n_workers = int(workers or cfg.get("workers", 1))
        if n_workers > 1:
            with concurrent.futures.ProcessPoolExecutor(n_workers) as pool:
                codes = list(pool.map(_batch_entry, jobs))
        else:
            codes = [_batch_entry(j) for j in jobs]
        return max(codes)
    return _run_single(subcommand, cfg, out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gaugelab",
        description="Lattice gauge-theory experiment runner")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        code = run(args.subcommand, args.config, args.seed, args.out,
                   args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
