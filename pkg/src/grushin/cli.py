"""Command line front end: experiments in, CSV/JSON artifacts out.

Every successful invocation writes a manifest.json holding the merged
configuration, its sha256 hash, wall time, library version, and the
artifact list.  Precedence is defaults, then flags, then the --config
file; GRUSHIN_OUT overrides the output directory.  CSV cells use 17
significant digits, so equal config and seed reproduce byte-identical
bodies.  Exit codes: 0 ok, 2 bad configuration, 3 numerical failure.
"""

import hashlib
import json
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .admissibility import (
    AdmissibleTriple,
    admissible_table,
    as_exponent,
    format_table_csv,
)
from .dispersion import fit_decay, format_decay_csv
from .errors import ConfigError, NumericalError
from .fields import (
    Geometry,
    analyze,
    block_norms,
    load_field,
    quasi_orthogonality_ratio,
    random_field,
    save_field,
    sobolev_norm,
    synthesize,
)
from .nls import CauchyProblem, conservation_report, ledger_csv, solve, theorem_coverage
from .strichartz import (
    QuotientExperiment,
    counterexample_d2_1,
    quotient_scan,
    scaling_check,
)

GEOMETRY_KEYS = ("d1", "d2", "case", "L", "K_max", "m_max", "quad_order",
                 "x_scale")

_GEOM_DEFAULTS = {"d1": 1, "d2": 2, "case": "euclidean_box", "L": None,
                  "K_max": 8, "m_max": 8, "quad_order": None, "x_scale": 1.0}

_DEFAULTS = {
    "basis-check": dict(_GEOM_DEFAULTS, seed=0),
    "decompose": dict(_GEOM_DEFAULTS, seed=0, s=None),
    "dispersion-scan": {"sigma": 1.0, "d": 2, "t_min": 10.0, "t_max": 1000.0,
                        "nodes": 9},
    "strichartz-scan": {"p": "6", "q": "2", "r": "6", "sigma": "1",
                        "d1": 1, "d2": 2, "case": "euclidean",
                        "epsilon": 0.1, "A_max": 8, "samples": 32, "seed": 0,
                        "T1": 3.0, "K_max": 16, "n_y": 48},
    "scaling-check": {"p": "6", "q": "2", "r": "6", "sigma": "1",
                      "d1": 1, "d2": 2, "lam": 2.0, "seed": 5,
                      "L": 16 * np.pi, "K_max": 12, "m_max": 2,
                      "x_scale": 2.0, "T": 0.25, "epsilon": 0.0, "n_y": 48},
    "counterexample": {"N": 8, "T_horizon": 1.0, "L": 16 * np.pi,
                       "eta_factor": 5.0, "n_checks": 9},
    "nls-run": dict(_GEOM_DEFAULTS, sigma=1.0, kappa=3, s=1.1, T=0.02,
                    solver="splitting", dt=0.0, tol=1e-8, depth=12,
                    coupling=1.0, seed=0, amplitude=0.5, datum=None,
                    checkpoints=4, coverage_case="euclidean"),
    "admissibility-table": {"d1": 1, "d2": 2, "sigma": "1",
                            "case": "euclidean", "q": "2", "n": 8},
}


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError("config %s: %s" % (path, e.strerror))
    except json.JSONDecodeError as e:
        raise ConfigError("config %s line %d column %d: %s"
                          % (path, e.lineno, e.colno, e.msg))


def _merge(kind, flags, file_cfg, global_seed):
    params = dict(_DEFAULTS[kind])
    if global_seed is not None and "seed" in params:
        params["seed"] = global_seed
    for key, val in flags.items():
        if val is not None:
            params[key] = val
    unknown = sorted(set(file_cfg) - set(params) - {"kind", "out"})
    if unknown:
        raise ConfigError("unknown config key(s) for %s: %s"
                          % (kind, ", ".join(unknown)))
    params.update({k: v for k, v in file_cfg.items()
                   if k not in ("kind", "out")})
    return params


class Workspace:
    """Artifact sink rooted at one directory; writes outside it refuse."""

    def __init__(self, root):
        self.root = os.path.realpath(root)
        os.makedirs(self.root, exist_ok=True)
        self.artifacts = []

    def path(self, name):
        p = os.path.realpath(os.path.join(self.root, name))
        if p != self.root and not p.startswith(self.root + os.sep):
            raise ConfigError("artifact path %r escapes the output directory"
                              % name)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        self.artifacts.append(os.path.relpath(p, self.root))
        return p

    def write_text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _config_hash(kind, params):
    blob = json.dumps({"kind": kind, "params": _jsonable(params)},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _stamp(text, digest):
    return "# config sha256 %s\n%s" % (digest, text)


def _geometry(params):
    kw = {k: params[k] for k in GEOMETRY_KEYS}
    if kw["L"] is not None:
        kw["L"] = float(kw["L"])
    return Geometry(**kw)


def _run_basis_check(params, ws, digest):
    geom = _geometry(params)
    lines = ["shell,s,eta,gram_defect"]
    for j, s in enumerate(geom.shell_s):
        lines.append("%d,%d,%.17g,%.17g"
                     % (j, int(s), geom.eta_abs_shell[j],
                        geom.shell_defect[j]))
    ws.write_text("basis.csv", _stamp("\n".join(lines) + "\n", digest))
    rng = np.random.default_rng(params["seed"])
    u = random_field(geom, rng, zero_fiber=False)
    v = synthesize(u)
    w = analyze(v, geom)
    resid = float(np.linalg.norm(w.coeffs - u.coeffs) / u.l2_norm())
    worst = float(geom.shell_defect.max())
    return {
        "max_gram_defect": worst,
        "bad_shells": int(geom.bad_shell.sum()),
        "roundtrip_residual": resid,
        "verdict": "ok" if resid < 1e-10 and not geom.bad_shell.any()
        else "underresolved shells present",
    }


def _run_decompose(params, ws, digest):
    geom = _geometry(params)
    rng = np.random.default_rng(params["seed"])
    u = random_field(geom, rng, s=params["s"], zero_fiber=False)
    norms = block_norms(u)
    lines = ["A,norm"]
    for a in sorted(norms):
        lines.append("%.17g,%.17g" % (a, norms[a]))
    ws.write_text("decompose.csv", _stamp("\n".join(lines) + "\n", digest))
    ratio = quasi_orthogonality_ratio(u)
    return {"blocks": len(norms), "l2": u.l2_norm(),
            "quasi_orthogonality": ratio}


def _run_dispersion_scan(params, ws, digest):
    grid = np.geomspace(float(params["t_min"]), float(params["t_max"]),
                        int(params["nodes"]))
    fit = fit_decay(float(params["sigma"]), int(params["d"]), grid)
    ws.write_text("dispersion.csv", _stamp(format_decay_csv(fit), digest))
    d, sig = int(params["d"]), float(params["sigma"])
    target = -(d - 1) / 2.0 if sig == 1.0 else -d / 2.0
    return {"slope": fit.slope, "monotone": fit.monotone,
            "widened": fit.widened, "target_slope": target}


def _triple(params):
    return AdmissibleTriple(as_exponent(params["p"]),
                            as_exponent(params["q"]),
                            as_exponent(params["r"]),
                            as_exponent(params["sigma"]),
                            int(params["d1"]), int(params["d2"]),
                            params.get("case", "euclidean"))


def _run_strichartz_scan(params, ws, digest):
    exp = QuotientExperiment(_triple(params),
                             epsilon=float(params["epsilon"]),
                             A_max=int(params["A_max"]),
                             samples=int(params["samples"]),
                             seed=int(params["seed"]),
                             T1=float(params["T1"]),
                             K_max=int(params["K_max"]),
                             n_y=int(params["n_y"]))
    res = quotient_scan(exp)
    ws.write_text("strichartz.csv", _stamp(res.csv(), digest))
    summary = res.summary()
    summary["config_sha256"] = digest
    ws.write_json("strichartz_summary.json", _jsonable(summary))
    return {"verdict": res.verdict, "gate_ratio": res.gate_ratio,
            "negative_slope": res.neg_slope}


def _run_scaling_check(params, ws, digest):
    geom = Geometry(d1=int(params["d1"]), d2=int(params["d2"]),
                    L=float(params["L"]), K_max=int(params["K_max"]),
                    m_max=int(params["m_max"]),
                    x_scale=float(params["x_scale"]))
    rng = np.random.default_rng(params["seed"])
    u0 = random_field(geom, rng, zero_fiber=False)
    q1, q2 = scaling_check(u0, float(params["lam"]), _triple(params),
                           epsilon=float(params["epsilon"]),
                           T=float(params["T"]), n_y=int(params["n_y"]))
    rel = abs(q2 - q1) / q1
    out = {"config_sha256": digest, "lam": float(params["lam"]),
           "quotient": q1, "quotient_rescaled": q2, "rel_gap": rel,
           "verdict": "scaling holds" if rel < 1e-6
           else "scaling broken: ratio %.6g" % (q2 / q1)}
    ws.write_json("scaling.json", _jsonable(out))
    return {k: out[k] for k in ("quotient", "quotient_rescaled", "rel_gap",
                                "verdict")}


def _run_counterexample(params, ws, digest):
    rep = counterexample_d2_1(N=int(params["N"]),
                              T_horizon=float(params["T_horizon"]),
                              L=float(params["L"]),
                              eta_factor=float(params["eta_factor"]),
                              n_checks=int(params["n_checks"]))
    rep["config_sha256"] = digest
    ws.write_json("counterexample.json", _jsonable(rep))
    return {"verdict": rep["verdict"],
            "translation_defect": rep["translation_defect"],
            "linf_drift": rep["linf_drift"]}


def _run_nls(params, ws, digest):
    if params["datum"] is not None:
        u0 = load_field(params["datum"])
    else:
        geom = _geometry(params)
        rng = np.random.default_rng(params["seed"])
        u0 = random_field(geom, rng, s=float(params["s"]), zero_fiber=False)
        u0.coeffs *= float(params["amplitude"]) / sobolev_norm(
            u0, float(params["s"]))
    pb = CauchyProblem(u0, sigma=float(params["sigma"]),
                       kappa=int(params["kappa"]), s=float(params["s"]),
                       T=float(params["T"]), solver=params["solver"],
                       dt=float(params["dt"]), tol=float(params["tol"]),
                       depth=int(params["depth"]),
                       coupling=float(params["coupling"]))
    coverage = theorem_coverage(pb, case=params["coverage_case"])
    traj = solve(pb)
    rep = conservation_report(traj, pb.sigma, pb.kappa, s=pb.s,
                              coupling=pb.coupling)
    ws.write_text("ledger.csv", _stamp(ledger_csv(rep), digest))
    n_check = min(int(params["checkpoints"]), len(traj.states))
    idx = sorted({int(round(i)) for i in
                  np.linspace(0, len(traj.states) - 1, max(n_check, 1))})
    for i in idx:
        save_field(traj.states[i], ws.path("state_%04d.field" % i))
    return {
        "coverage": coverage,
        "solver": _jsonable(traj.info),
        "mass_drift": rep["mass_drift"],
        "energy_drift": rep["energy_drift"],
        "fitted_c": rep["fitted_c"],
        "h_sigma_range": [float(rep["h_sigma"].min()),
                          float(rep["h_sigma"].max())],
    }


def _run_admissibility_table(params, ws, digest):
    rows = admissible_table(int(params["d1"]), int(params["d2"]),
                            as_exponent(params["sigma"]),
                            case=params["case"], q=as_exponent(params["q"]),
                            n=int(params["n"]))
    ws.write_text("admissibility.csv", _stamp(format_table_csv(rows), digest))
    return {"rows": len(rows)}


_RUNNERS = {
    "basis-check": _run_basis_check,
    "decompose": _run_decompose,
    "dispersion-scan": _run_dispersion_scan,
    "strichartz-scan": _run_strichartz_scan,
    "scaling-check": _run_scaling_check,
    "counterexample": _run_counterexample,
    "nls-run": _run_nls,
    "admissibility-table": _run_admissibility_table,
}


def _out_root(file_cfg, gl):
    env = os.environ.get("GRUSHIN_OUT")
    if env:
        return env
    if isinstance(file_cfg, dict) and file_cfg.get("out"):
        return file_cfg["out"]
    if gl.get("out_dir"):
        return gl["out_dir"]
    return "grushin-out"


def _apply_threads(n):
    if n is None:
        return
    if n < 1:
        raise ConfigError("threads must be a positive integer")
    import threadpoolctl

    threadpoolctl.threadpool_limits(limits=n)


def _manifest(ws, entries, gl, t0):
    ws.write_json("manifest.json", {
        "version": __version__,
        "experiments": entries,
        "seed": gl.get("seed"),
        "threads": gl.get("threads"),
        "wall_time_s": time.monotonic() - t0,
        "artifacts": sorted(ws.artifacts),
    })


def _execute(ctx, kind, flags):
    gl = ctx.obj
    t0 = time.monotonic()
    try:
        _apply_threads(gl.get("threads"))
        file_cfg = _load_config(gl.get("config_path"))
        if "experiments" in file_cfg:
            raise ConfigError(
                "config with an experiment list runs via 'grushin run'")
        params = _merge(kind, flags, file_cfg, gl.get("seed"))
        ws = Workspace(_out_root(file_cfg, gl))
        digest = _config_hash(kind, params)
        results = _RUNNERS[kind](params, ws, digest)
        entry = {"kind": kind, "config": _jsonable(params),
                 "config_sha256": digest, "results": _jsonable(results)}
        _manifest(ws, [entry], gl, t0)
    except ConfigError as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    except NumericalError as e:
        click.echo("numerical failure: %s" % e, err=True)
        sys.exit(3)
    click.echo("%s: artifacts in %s" % (kind, ws.root))


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config; its keys override flags.")
@click.option("--seed", type=int, default=None, help="Base RNG seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=None, help="Output directory (GRUSHIN_OUT overrides).")
@click.option("--threads", type=int, default=None,
              help="Cap BLAS worker threads.")
@click.pass_context
def main(ctx, config_path, seed, out_dir, threads):
    """Spectral experiments for the Grushin operator."""
    ctx.obj = {"config_path": config_path, "seed": seed, "out_dir": out_dir,
               "threads": threads}


def _geometry_options(fn):
    opts = [
        click.option("--d1", type=int, default=None),
        click.option("--d2", type=int, default=None),
        click.option("--case", type=click.Choice(["euclidean_box", "torus"]),
                     default=None),
        click.option("--L", "L", type=float, default=None,
                     help="Box side length."),
        click.option("--K-max", "K_max", type=int, default=None),
        click.option("--m-max", "m_max", type=int, default=None),
        click.option("--quad-order", "quad_order", type=int, default=None),
        click.option("--x-scale", "x_scale", type=float, default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@main.command("basis-check")
@_geometry_options
@click.pass_context
def basis_check_cmd(ctx, **flags):
    """Per-shell Gram defects and a transform round trip."""
    _execute(ctx, "basis-check", flags)


@main.command("decompose")
@_geometry_options
@click.option("--s", type=float, default=None,
              help="Sobolev shaping of the random datum.")
@click.pass_context
def decompose_cmd(ctx, **flags):
    """Dyadic block norms of a seeded random field."""
    _execute(ctx, "decompose", flags)


@main.command("dispersion-scan")
@click.option("--sigma", type=float, default=None)
@click.option("--d", type=int, default=None, help="y dimension d2.")
@click.option("--t-min", "t_min", type=float, default=None)
@click.option("--t-max", "t_max", type=float, default=None)
@click.option("--nodes", type=int, default=None)
@click.pass_context
def dispersion_scan_cmd(ctx, **flags):
    """Fit the decay exponent of the fixed-time kernel bound."""
    _execute(ctx, "dispersion-scan", flags)


def _triple_options(fn):
    for opt in reversed([
        click.option("--p", default=None),
        click.option("--q", default=None),
        click.option("--r", default=None),
        click.option("--sigma", default=None),
        click.option("--d1", type=int, default=None),
        click.option("--d2", type=int, default=None),
    ]):
        fn = opt(fn)
    return fn


@main.command("strichartz-scan")
@_triple_options
@click.option("--case", type=click.Choice(["euclidean", "compact"]),
              default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--a-max", "A_max", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--t1", "T1", type=float, default=None)
@click.option("--k-max", "K_max", type=int, default=None)
@click.option("--n-y", "n_y", type=int, default=None)
@click.pass_context
def strichartz_scan_cmd(ctx, **flags):
    """Monte-Carlo quotient gate across dyadic blocks."""
    _execute(ctx, "strichartz-scan", flags)


@main.command("scaling-check")
@_triple_options
@click.option("--lam", type=float, default=None)
@click.option("--L", "L", type=float, default=None)
@click.option("--k-max", "K_max", type=int, default=None)
@click.option("--m-max", "m_max", type=int, default=None)
@click.option("--x-scale", "x_scale", type=float, default=None)
@click.option("--t", "T", type=float, default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--n-y", "n_y", type=int, default=None)
@click.pass_context
def scaling_check_cmd(ctx, **flags):
    """Quotient invariance under the parabolic rescaling."""
    _execute(ctx, "scaling-check", flags)


@main.command("counterexample")
@click.option("--n", "N", type=int, default=None)
@click.option("--t-horizon", "T_horizon", type=float, default=None)
@click.option("--L", "L", type=float, default=None)
@click.option("--eta-factor", "eta_factor", type=float, default=None)
@click.option("--checks", "n_checks", type=int, default=None)
@click.pass_context
def counterexample_cmd(ctx, **flags):
    """Traveling-wave check on the non-dispersive line d2 = 1."""
    _execute(ctx, "counterexample", flags)


@main.command("nls-run")
@_geometry_options
@click.option("--sigma", type=float, default=None)
@click.option("--kappa", type=int, default=None)
@click.option("--s", type=float, default=None)
@click.option("--t", "T", type=float, default=None, help="Horizon.")
@click.option("--solver", type=click.Choice(["picard", "splitting"]),
              default=None)
@click.option("--dt", type=float, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--depth", type=int, default=None)
@click.option("--coupling", type=float, default=None)
@click.option("--amplitude", type=float, default=None,
              help="H^s size of the random datum.")
@click.option("--datum", type=click.Path(exists=True), default=None,
              help="Load the datum from a field file instead.")
@click.option("--checkpoints", type=int, default=None)
@click.option("--coverage-case", "coverage_case",
              type=click.Choice(["euclidean", "compact"]), default=None)
@click.pass_context
def nls_run_cmd(ctx, **flags):
    """Solve the nonlinear flow and emit the conservation ledger."""
    _execute(ctx, "nls-run", flags)


@main.command("admissibility-table")
@click.option("--d1", type=int, default=None)
@click.option("--d2", type=int, default=None)
@click.option("--sigma", default=None)
@click.option("--case", type=click.Choice(["euclidean", "compact"]),
              default=None)
@click.option("--q", default=None)
@click.option("--n", type=int, default=None)
@click.pass_context
def admissibility_table_cmd(ctx, **flags):
    """Sweep the admissible window into a CSV table."""
    _execute(ctx, "admissibility-table", flags)


@main.command("run")
@click.pass_context
def run_cmd(ctx):
    """Run the experiment list from --config sequentially."""
    gl = ctx.obj
    t0 = time.monotonic()
    try:
        _apply_threads(gl.get("threads"))
        if gl.get("config_path") is None:
            raise ConfigError("run needs --config with an experiment list")
        file_cfg = _load_config(gl["config_path"])
        experiments = file_cfg.get("experiments", [])
        if not isinstance(experiments, list):
            raise ConfigError("'experiments' must be a list")
        ws = Workspace(_out_root(file_cfg, gl))
        batch_seed = file_cfg.get("seed", gl.get("seed"))
        entries = []
        for i, exp in enumerate(experiments):
            if not isinstance(exp, dict) or "kind" not in exp:
                raise ConfigError("experiment %d has no 'kind'" % i)
            kind = exp["kind"]
            if kind not in _RUNNERS:
                raise ConfigError("experiment %d: unknown kind %r"
                                  % (i, kind))
            params = _merge(kind, {}, exp, batch_seed)
            sub = Workspace(os.path.join(ws.root, "exp-%03d-%s" % (i, kind)))
            digest = _config_hash(kind, params)
            results = _RUNNERS[kind](params, sub, digest)
            ws.artifacts.extend(os.path.join(os.path.relpath(sub.root,
                                                             ws.root), a)
                                for a in sub.artifacts)
            entries.append({"kind": kind, "config": _jsonable(params),
                            "config_sha256": digest,
                            "results": _jsonable(results)})
        _manifest(ws, entries, gl, t0)
    except ConfigError as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    except NumericalError as e:
        click.echo("numerical failure: %s" % e, err=True)
        sys.exit(3)
    click.echo("ran %d experiment(s): artifacts in %s"
               % (len(entries), ws.root))


if __name__ == "__main__":
    main()
