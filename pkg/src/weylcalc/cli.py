"""Command line experiment runner.

``weylcalc run --config FILE --out DIR`` executes the experiments of a JSON
config and writes ``summary.json`` plus CSV attachments.  The exit code is 0
when every claim passes, 1 on a failed claim, 2 on a config parse error and 3
when a reference cannot be resolved.  ``weylcalc list`` and ``weylcalc
describe`` print built-in names; unknown names exit with 4.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict

import numpy as np

SCHEMA_VERSION = 1

TOLERANCES = {
    "sharp_exact": 0.0,
    "joint_order_slack": 0.25,
    "holo_abelian": 1e-6,
    "holo_hermite": 1e-6,
    "residue_identity": 1e-8,
    "casimir_drift": 1e-8,
    "hamiltonian_drift": 1e-8,
    "garding_drift": 0.10,
    "garding_abelian_min_eig": 1e-12,
    "angular_steps": 2.0,
    "homomorphism": 1e-10,
}

OPERATIONS: Dict[str, Callable] = {}
BACKENDS = ("abelian", "heisenberg")


class ConfigError(ValueError):
    """Config cannot be parsed (exit 2)."""


class ResolutionError(KeyError):
    """A reference in the config does not resolve (exit 3)."""


def operation(name):
    def deco(f):
        OPERATIONS[name] = f
        return f
    return deco


class Context:
    """Per-experiment state: tolerances, seeded generator, claims and attachments."""

    def __init__(self, cfg: dict, seed: int, tol_scale: float = 1.0):
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        tol = dict(TOLERANCES)
        for k, v in cfg.get("tolerances", {}).items():
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"tolerance {k!r} must be a nonnegative number")
            tol[k] = float(v)
        self.tol = {k: v * tol_scale for k, v in tol.items()}
        self.claims = []
        self.values = {}
        self.attachments = {}

    def claim(self, name: str, value, tol_name: str, relation: str = "<=", bound=None):
        """Record ``value relation bound`` (``bound`` defaults to the named tolerance)."""
        t = self.tol[tol_name] if bound is None else bound
        v = float(value)
        ok = {"<=": v <= t, ">=": v >= t, "<": v < t}[relation]
        self.claims.append({"claim": name, "value": v, "relation": relation, "bound": float(t),
                            "tolerance": tol_name, "pass": bool(ok)})
        return ok

    def flag(self, name: str, ok: bool, tol_name: str):
        self.claims.append({"claim": name, "value": bool(ok), "relation": "is", "bound": True,
                            "tolerance": tol_name, "pass": bool(ok)})
        return ok


# -- resolution -----------------------------------------------------------------------------
def resolve_algebra(ref):
    from .lie import builtin, from_json
    if isinstance(ref, dict):
        try:
            return from_json(ref)
        except (KeyError, ValueError, TypeError) as exc:
            raise ResolutionError(f"bad algebra spec: {exc}") from exc
    try:
        return builtin(str(ref))
    except KeyError as exc:
        raise ResolutionError(f"unknown algebra {ref!r}") from exc


def resolve_backend(ref):
    from .representations import backend_from_json
    if ref is None:
        raise ResolutionError("this operation needs a backend")
    try:
        return backend_from_json(ref)
    except ValueError as exc:
        raise ResolutionError(str(exc)) from exc


def resolve_symbols(texts, n):
    from .expr import parse_symbol
    out = []
    for t in texts:
        try:
            out.append(parse_symbol(t, n))
        except Exception as exc:
            raise ResolutionError(f"cannot parse symbol {t!r}: {exc}") from exc
    return out


def resolve_vectors(backend, specs):
    from .representations import standard_vector
    out = []
    for spec in specs:
        spec = dict(spec)
        kind = spec.pop("kind", None)
        vid = spec.pop("id", kind)
        try:
            out.append(standard_vector(backend, kind, label=vid, **spec))
        except (KeyError, TypeError) as exc:
            raise ResolutionError(str(exc)) from exc
    return out


# -- operations -----------------------------------------------------------------------------
@operation("sharp-table")
def op_sharp_table(cfg, ctx):
    from .poly import random_poly
    from .star import ck_operator, ck_table_json, poisson_bracket, sharp
    A = resolve_algebra(cfg.get("algebra", "heisenberg3"))
    p_ = cfg.get("params", {})
    count, deg = int(p_.get("pairs", 20)), int(p_.get("degree", 4))
    pairs = [(random_poly(ctx.rng, A.dim, deg), random_poly(ctx.rng, A.dim, deg)) for _ in range(count)]
    syms = resolve_symbols(cfg.get("symbols", []), A.dim)
    pairs += list(zip(syms[0::2], syms[1::2]))
    abelian = not A.c.any()
    c0 = c1 = prod = 0
    for p, q in pairs:
        c0 += 0 if ck_operator(A, 0)(p, q) == p * q else 1
        c1 += 0 if ck_operator(A, 1)(p, q) == poisson_bracket(A, p, q) * (0, Fraction(1, 2)) else 1
        if abelian:
            diff = sharp(A, p, q) - p * q
            if not diff.is_zero():
                prod = max(prod, float(np.max(np.abs(diff(ctx.rng.normal(size=(8, A.dim)))))))
    ctx.values["pairs"] = len(pairs)
    ctx.claim("C0_mismatches", c0, "sharp_exact")
    ctx.claim("C1_mismatches", c1, "sharp_exact")
    if abelian:
        ctx.claim("max_abs_sharp_minus_product", prod, "sharp_exact")
    ctx.attachments["ck_table.json"] = ck_table_json(A, int(p_.get("kmax", 2)))


@operation("parametrix-residual")
def op_parametrix(cfg, ctx):
    from .parametrix import joint_order, neumann_parametrix
    from .symbols import directions
    A = resolve_algebra(cfg.get("algebra", "heisenberg3"))
    p_ = cfg.get("params", {})
    sym = resolve_symbols(cfg.get("symbols", ["1 + " + " + ".join(f"xi{i + 1}^2" for i in range(A.dim))]),
                          A.dim)[0]
    N = int(p_.get("N", 2))
    R = neumann_parametrix(A, sym, N=N)
    dirs = directions(A.dim, int(p_.get("directions", 9)))
    m = float(sym.degree)
    orders, _ = joint_order(lambda lam, xi: R.residual_evaluator(lam, xi), dirs, m,
                            int(p_.get("ladder", 8)))
    worst = float(np.max(orders))
    ctx.values["joint_orders"] = [float(o) for o in orders]
    ctx.claim("joint_order", worst, "joint_order_slack", bound=-N + ctx.tol["joint_order_slack"])


@operation("holo-power")
def op_holo_power(cfg, ctx):
    from .holo import HoloFunction, holo_any, holo_matrix, residue_power, spectral_function
    from .lie import abelian
    from .parametrix import neumann_parametrix
    from .poly import PolySymbol
    from .representations import AbelianRegular
    p_ = cfg.get("params", {})
    backend = resolve_backend(cfg.get("backend"))
    if isinstance(backend, AbelianRegular):
        powers = [float(s) for s in p_.get("powers", [-0.5, 0.5])]
        p = PolySymbol.parse("1 + xi1^2", 1)
        R = neumann_parametrix(abelian(1), p, N=1)
        xi = np.linspace(-10, 10, 201)[:, None]
        worst = 0.0
        for s in powers:
            got = holo_any(HoloFunction.power(s), R, xi)
            exact = (1 + xi[:, 0] ** 2) ** s
            worst = max(worst, float(np.max(np.abs(got - exact) / np.abs(exact))))
        ctx.claim("max_rel_error", worst, "holo_abelian")
        res = residue_power(R, 1, xi, 0.25)
        ctx.claim("residue_identity", float(np.max(np.abs(res * (1 + xi[:, 0] ** 2) - 1))), "residue_identity")
        return
    powers = [float(s) for s in p_.get("powers", [-1.0, -0.5, 0.5, 1.0])]
    L = PolySymbol.parse(p_.get("symbol", "1 + xi1^2 + xi2^2 + xi3^2"), 3)
    M = backend.quantize(L)
    blk = backend.interior(L.degree)
    worst = 0.0
    rows = ["s,max_abs_error"]
    for s in powers:
        phi = HoloFunction.power(s / 2) if p_.get("half", True) else HoloFunction.power(s)
        got = holo_matrix(phi, M)[blk, blk]
        ref = spectral_function(phi, M)[blk, blk]
        err = float(np.max(np.abs(got - ref)) / max(float(np.max(np.abs(ref))), 1.0))
        rows.append(f"{s!r},{err!r}")
        worst = max(worst, err)
    ctx.attachments["power_errors.csv"] = "\n".join(rows) + "\n"
    ctx.claim("max_eigen_error", worst, "holo_hermite")


def _wf_mask_text(cone):
    return "".join("1" if f == "in" else "0" for f in cone.flags)


@operation("wf-estimate")
def op_wf(cfg, ctx):
    from .wavefront import estimate_wf
    backend = resolve_backend(cfg.get("backend"))
    vecs = resolve_vectors(backend, cfg.get("vectors", []))
    expected = cfg.get("params", {}).get("expected", {})
    for u in vecs:
        rep = estimate_wf(backend, u)
        ctx.values[f"{u.label}.flags"] = _wf_mask_text(rep.cone)
        ctx.attachments[f"wf_{u.label}.csv"] = rep.to_csv()
        if u.label in expected:
            ctx.flag(f"{u.label}.matches_expected", _wf_mask_text(rep.cone) == expected[u.label], "angular_steps")


@operation("propagation")
def op_propagation(cfg, ctx):
    from .wavefront import propagation_experiment
    A = resolve_algebra(cfg.get("algebra", "heisenberg3"))
    backend = resolve_backend(cfg.get("backend"))
    p_ = cfg.get("params", {})
    a = resolve_symbols([p_.get("hamiltonian", "xi1^2 + xi2^2" if A.dim == 3 else "xi1^2")], A.dim)[0]
    t1 = float(p_.get("t1", np.pi / 4))
    for u in resolve_vectors(backend, cfg.get("vectors", [])):
        rep = propagation_experiment(backend, A, a, u, t1, tol_steps=ctx.tol["angular_steps"],
                                     delta=float(p_.get("delta", 0.25)))
        ctx.values[f"{u.label}.hausdorff"] = rep["hausdorff"]
        ctx.claim(f"{u.label}.cone_transport", rep["hausdorff"], "angular_steps", bound=rep["tolerance"])


@operation("restriction")
def op_restriction(cfg, ctx):
    from .wavefront import restriction_experiment
    backend = resolve_backend(cfg.get("backend"))
    p_ = cfg.get("params", {})
    vecs = resolve_vectors(backend, cfg.get("vectors", []))
    if not vecs:
        raise ResolutionError("restriction needs at least one vector")
    u = vecs[0]
    v = vecs[1] if len(vecs) > 1 else None
    rep = restriction_experiment(backend, p_.get("h_basis", [[1, 0, 0]]), u, v, int(p_.get("k_max", 3)))
    ctx.values["part1"] = rep["part1"]["status"]
    if "part2" in rep:
        ctx.values["part2"] = rep["part2"]["status"]
    for part in ("part1", "part2"):
        if part in rep:
            ctx.flag(f"{part}.not_failed", rep[part]["status"] != "fail", "angular_steps")


@operation("garding")
def op_garding(cfg, ctx):
    from .representations import HeisenbergSchrodinger, garding_check
    p_ = cfg.get("params", {})
    backend_ref = cfg.get("backend") or {"variant": "heisenberg"}
    if backend_ref.get("variant") == "abelian":
        backend = resolve_backend(backend_ref)
        for p in resolve_symbols(cfg.get("symbols", ["xi1^2"]), backend.n):
            r = garding_check(backend, p)
            ctx.claim(f"{p.to_text()}.min_eig", r["min_eig"], "garding_abelian_min_eig", ">=",
                      bound=-ctx.tol["garding_abelian_min_eig"])
        return
    sizes = [int(n) for n in p_.get("sizes", [64, 128])]
    for p in resolve_symbols(cfg.get("symbols", ["xi1^2*xi2^2"]), 3):
        reps = [garding_check(HeisenbergSchrodinger(n), p) for n in sizes]
        ctx.values[f"{p.to_text()}.min_eig"] = [r["min_eig"] for r in reps]
        ctx.values[f"{p.to_text()}.C"] = [r["C"] for r in reps]
        m0, m1 = reps[0]["min_eig"], reps[-1]["min_eig"]
        ctx.values[f"{p.to_text()}.min_eig_drift"] = abs(m1 - m0) / max(abs(m0), abs(m1), 1e-300)
        c0, c1 = reps[0]["C"], reps[-1]["C"]
        drift = abs(c1 - c0) / max(abs(c0), abs(c1), 1e-300)
        ctx.claim(f"{p.to_text()}.C_drift", drift, "garding_drift")


@operation("euler-flow")
def op_euler(cfg, ctx):
    from .poisson import integrate_bicharacteristic
    from .poly import PolySymbol
    p_ = cfg.get("params", {})
    I = [float(v) for v in p_.get("inertia", [1, 2, 3])]
    A = resolve_algebra(cfg.get("algebra", "so3"))
    a = PolySymbol(3, {(2, 0, 0): 0.5 / I[0], (0, 2, 0): 0.5 / I[1], (0, 0, 2): 0.5 / I[2]})
    bc = integrate_bicharacteristic(A, a, p_.get("xi0", [1.0, 1.0, 1.0]), tuple(p_.get("t_span", [0, 10])),
                                    float(p_.get("step", 1e-3)), stride=int(p_.get("stride", 100)))
    ctx.claim("hamiltonian_drift", bc.drift("a"), "hamiltonian_drift")
    for k in sorted(bc.conserved):
        if k != "a":
            ctx.claim(f"casimir_drift.{k}", bc.drift(k), "casimir_drift")
    ctx.attachments["trajectory.csv"] = bc.to_csv()


# -- running -------------------------------------------------------------------------------------
def _clean(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _clean(v.item())
    return v


def run_experiment(cfg: dict, seed: int | None = None, tol_scale: float = 1.0) -> tuple:
    """Run one experiment config; returns ``(summary, attachments)``."""
    if not isinstance(cfg, dict):
        raise ConfigError("an experiment config must be a JSON object")
    op = cfg.get("operation")
    if op not in OPERATIONS:
        raise ResolutionError(f"unknown operation {op!r}")
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    ctx = Context(cfg, seed, tol_scale)
    OPERATIONS[op](cfg, ctx)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.get("name", op),
        "operation": op,
        "seed": seed,
        "tolerances": {k: ctx.tol[k] for k in sorted({c["tolerance"] for c in ctx.claims})},
        "claims": ctx.claims,
        "values": ctx.values,
        "pass": all(c["pass"] for c in ctx.claims),
    }
    return _clean(summary), ctx.attachments


def summary_text(summary) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _preload():
    # lazy imports from worker threads can race inside sympy, so load everything up front
    import importlib
    for mod in ("lie", "poly", "expr", "symbols", "star", "jets", "poisson", "parametrix",
                "holo", "representations", "wavefront"):
        importlib.import_module(f".{mod}", __package__)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    experiments = cfg["experiments"] if "experiments" in cfg else [cfg]
    out = Path(args.out)

    def one(c):
        return run_experiment(c, args.seed, args.tol_scale)

    _preload()

    try:
        with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
            results = list(pool.map(one, experiments))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResolutionError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 3
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    for i, (summary, att) in enumerate(results):
        stem = summary["name"] if len(results) == 1 else f"{i:02d}_{summary['name']}"
        d = out if len(results) == 1 else out / stem
        d.mkdir(parents=True, exist_ok=True)
        (d / "summary.json").write_text(summary_text(summary))
        for name, text in sorted(att.items()):
            (d / name).write_text(text)
        ok = ok and summary["pass"]
        print(f"{summary['name']}: {'PASS' if summary['pass'] else 'FAIL'}")
    return 0 if ok else 1


def _list_items(kind):
    from .lie import BUILTINS
    return {"algebras": list(BUILTINS), "backends": list(BACKENDS),
            "experiments": sorted(OPERATIONS)}.get(kind)


def cmd_list(args) -> int:
    items = _list_items(args.kind)
    if items is None:
        print(f"error: unknown list {args.kind!r}", file=sys.stderr)
        return 4
    for it in items:
        print(it)
    return 0


def cmd_describe(args) -> int:
    from .lie import builtin
    name = args.name
    try:
        A = builtin(name)
    except KeyError:
        A = None
    if A is not None:
        print(f"algebra {name} dim {A.dim}")
        for i, j, k, v in A.triplets():
            print(f"[{i + 1},{j + 1},{k + 1},{float(v)!r}]")
        return 0
    if name in OPERATIONS:
        print(f"experiment {name}")
        print((OPERATIONS[name].__doc__ or "").strip())
        return 0
    if name in BACKENDS:
        print(f"backend {name}")
        return 0
    print(f"error: unknown name {name!r}", file=sys.stderr)
    return 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weylcalc", description="symbolic calculus experiment runner")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="results")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--tol-scale", type=float, default=1.0)
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list algebras, backends or experiments")
    ls.add_argument("kind")
    ls.set_defaults(func=cmd_list)
    d = sub.add_parser("describe", help="describe a built-in name")
    d.add_argument("name")
    d.set_defaults(func=cmd_describe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "tol_scale", 1.0) is not None and getattr(args, "tol_scale", 1.0) <= 0:
        print("error: --tol-scale must be positive", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
