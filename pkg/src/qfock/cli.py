"""Command-line front end: ``qfock <command> --config run.yaml``.

Every command writes a JSON report with the checks it ran and exits 0 iff all
of them pass.  Invalid configurations exit with status 2 and name the field.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from importlib import metadata

import numpy as np
import scipy

from . import arakiwoods as aw
from . import convlemma, qops, wick
from .cache import GramCache, cache_admin
from .config import ConfigError, RunConfig, load_config
from .errors import QFockError, UnsupportedModeError
from .fock import FockBasis
from .qgram import GramSeries, gram_block, gram_naive
from .report import Check, CheckReport, floor_check, identity_check, residual_check

NAIVE_MAX_DEGREE = 8
EXACT_COMMANDS = ("gram",)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


class Context:
    def __init__(self, cfg: RunConfig, cache_dir: str | None):
        self.cfg = cfg
        self.tol = cfg.tolerances
        self.rng = make_rng(cfg.seed)
        self.cache = GramCache(cache_dir) if cache_dir else None
        self._model = None

    @property
    def params(self) -> dict:
        return self.cfg.params

    def param(self, key, default):
        return self.cfg.params.get(key, default)

    @property
    def model(self):
        if self._model is None:
            cfg = self.cfg
            basis = FockBasis(cfg.d, cfg.N, cfg.budget)
            if cfg.kind == "mixed":
                self._model = qops.MixedModel(cfg.Q, cfg.N, cache=self.cache, basis=basis)
            else:
                self._model = aw.AWModel(cfg.blocks, cfg.q, cfg.N, basis=basis)
        return self._model

    def require(self, kind: str, command: str):
        if self.cfg.kind != kind:
            raise UnsupportedModeError(f"{command} needs kind {kind}, config has {self.cfg.kind}")

    @property
    def cache_hits(self) -> int:
        return self.cache.hits if self.cache else 0


# -- commands -----------------------------------------------------------------------


def cmd_gram(ctx: Context) -> CheckReport:
    cfg = ctx.cfg
    N = int(ctx.param("n_max", cfg.N))
    rep = CheckReport()
    if cfg.kind == "mixed":
        series = GramSeries(cfg.Q, ctx.cache, cfg.budget)
        block = series.block
    else:
        block = ctx.model.gram
    mineigs = []
    for n in range(N + 1):
        P = block(n)
        ev = float(np.linalg.eigvalsh(P).min())
        mineigs.append(ev)
        rep.add(floor_check(f"gram/level{n}/min-eigenvalue", ev, ctx.tol["positivity_floor"]))
        scale = max(1.0, float(np.max(np.abs(P))))
        rep.add(residual_check(f"gram/level{n}/hermitian", float(np.max(np.abs(P - P.conj().T))), ctx.tol["bound_slack"] * scale))
    rep.data["mineigs"] = mineigs
    if cfg.kind != "mixed":
        return rep
    Q = cfg.Q
    naive_top = min(N, int(ctx.param("naive_max", 5)), NAIVE_MAX_DEGREE)
    for n in range(2, naive_top + 1):
        P = series.block(n)
        dev = float(np.max(np.abs(gram_naive(Q, n) - P)))
        scale = max(1.0, float(np.max(np.abs(P))))
        rep.add(residual_check(f"gram/level{n}/naive=recursive", dev, ctx.tol["gram_agreement"] * scale))
    if cfg.precision == "exact":
        exact_top = min(N, int(ctx.param("exact_max", 4)))
        for n in range(exact_top + 1):
            E = gram_block(Q, n, exact=True).matrix
            asym = max((abs(E[a, b] - E[b, a]) for a in range(len(E)) for b in range(a)), default=0)
            rep.add(residual_check(f"gram/level{n}/exact-symmetric", float(asym), 0.0))
            P = series.block(n)
            dev = float(np.max(np.abs(E.astype(float) - P)))
            scale = max(1.0, float(np.max(np.abs(P))))
            rep.add(residual_check(f"gram/level{n}/exact=float", dev, ctx.tol["gram_agreement"] * scale))
            rep.data.setdefault("exact_trace", []).append(str(sum(E[k, k] for k in range(len(E)))))
    return rep


def cmd_ops(ctx: Context) -> CheckReport:
    model = ctx.model
    rep = CheckReport()
    if ctx.cfg.kind == "mixed":
        for i in range(model.d):
            rep.extend(qops.gram_adjoint_check(model, i, ctx.tol["adjoint"]).checks)
    else:
        for i in range(model.d):
            e = model.letter(i)
            for side in ("left", "right"):
                c = model.left_creation(e) if side == "left" else model.right_creation(e)
                a = model.left_annihilation(e) if side == "left" else model.right_annihilation(e)
                rep.add(residual_check(f"adjoint/{side}/letter{i}", qops.adjoint_deviation(model, c, a), ctx.tol["adjoint"]))
    return rep


def cmd_commutator_decay(ctx: Context) -> CheckReport:
    model = ctx.model
    rep = CheckReport()
    slack = ctx.tol["bound_slack"]
    if ctx.cfg.kind == "mixed":
        Q = ctx.cfg.Q
        norms = {}
        for i in range(model.d):
            for j in range(model.d):
                cb = qops.commutator_blocks(Q, model.basis, i, j, model)
                rep.extend(cb.checks(slack))
                norms[f"{i},{j}"] = cb.norms
                if Q.is_constant:
                    q = float(Q.entries[0, 0])
                    for n, v in enumerate(cb.norms):
                        want = abs(q) ** n if i == j else 0.0
                        rep.add(identity_check(f"commutator/{i},{j}/level{n}/exact", v, want, slack))
        rep.data["norms"] = norms
    else:
        for i in range(model.d):
            for j in range(model.d):
                sub = aw.aw_commutation_check(model, model.letter(i), model.K[:, j], ctx.tol["identity"])
                for c in sub.checks:
                    c.name = f"{c.name}/f=e{i}/g=K{j}"
                rep.extend(sub.checks)
    return rep


def cmd_moments(ctx: Context) -> CheckReport:
    model = ctx.model
    default = 0 if ctx.cfg.kind == "mixed" else (model.invariant_letters() or [0])[0]
    i = int(ctx.param("letter", default))
    max_order = int(ctx.param("order", min(10, ctx.cfg.N - ctx.cfg.N % 2)))
    rep = CheckReport()
    if ctx.cfg.kind == "mixed":
        for order in range(2, max_order + 1, 2):
            rep.extend(qops.moment_check(model, i, order, ctx.tol["identity"]).checks)
    else:
        e = model.letter(i)
        if np.linalg.norm(model.A @ e - e) > 1e-12:
            raise UnsupportedModeError(f"letter {i} is not A-invariant; its field is not q-semicircular")
        s = model.field(e)
        for order in range(2, max_order + 1, 2):
            rep.add(
                identity_check(
                    f"moment/s{i}^{order}", qops.vacuum_moment([s] * order), qops.pair_partition_moment(model.q, 0, order), ctx.tol["identity"]
                )
            )
    return rep


def cmd_trace_check(ctx: Context) -> CheckReport:
    model = ctx.model
    if ctx.cfg.kind == "mixed":
        cap = int(ctx.param("degree_cap", ctx.cfg.N // 2))
        return qops.traciality_check(model, int(ctx.param("trials", 50)), cap, ctx.rng, ctx.tol["trace"])
    return aw.nontracial_witness(model, int(ctx.param("max_len", 2)), ctx.tol["nontracial"])


def cmd_wick(ctx: Context) -> CheckReport:
    model = ctx.model
    deg = int(ctx.param("max_degree", min(3, ctx.cfg.N - 1)))
    rep = wick.vacuum_fidelity(model, deg, ctx.tol["vacuum"])
    if model.crossing_q is not None:
        rep.extend(wick.crossing_equivalence(model, deg, ctx.tol["crossing"]).checks)
    if ctx.cfg.kind == "mixed":
        rep.extend(wick.right_route_agreement(model, deg, ctx.tol["crossing"]).checks)
    return rep


def cmd_commutant(ctx: Context) -> CheckReport:
    model = ctx.model
    left = int(ctx.param("left_degree", 2))
    right = int(ctx.param("right_degree", 2))
    return wick.commutant_check(model, left, right, int(ctx.param("trials", 30)), ctx.rng, ctx.tol["commutant"])


def _conv_setups(ctx: Context) -> list:
    suite = ctx.param("suite", "model")
    if suite == "default":
        return convlemma.default_suite(ctx.rng)
    if suite != "model":
        raise UnsupportedModeError(f"unknown conv-check suite {suite!r}")
    model = ctx.model
    if model.d < 2:
        raise UnsupportedModeError("conv-check needs at least two letters")
    out = []
    if ctx.cfg.kind == "mixed":
        Q = ctx.cfg.Q
        q = max(Q.qmax, 1e-3)
        for i in range(model.d):
            j = (i + 1) % model.d
            st = convlemma.mixed_setup(f"letter/i{i}", Q, ctx.cfg.N, [f"r{i}*", f"r{j}*"], [f"l{i}", f"l{j}"], [i], ctx.rng, q=q)
            out.append(st)
    else:
        inv = model.invariant_letters()
        others = [k for k in range(model.d) if k not in inv]
        if not inv or not others:
            raise UnsupportedModeError("conv-check on araki-woods needs invariant and non-invariant letters")
        g = model.letter(others[0])
        g = g / np.sqrt(model.aw_inner(g, g).real)
        out.append(
            convlemma.aw_setup("aw/invariant", model, [model.letter(inv[0]), g], [("l", model.letter(others[0])), ("l", model.letter(inv[0]))], ctx.rng)
        )
    return out


def cmd_conv_check(ctx: Context) -> CheckReport:
    slack = ctx.tol["hypothesis_slack"]
    rep = CheckReport()
    for st in _conv_setups(ctx):
        rep.extend(convlemma.validate_setup(st, slack).checks)
        rep.extend(convlemma.tn_expansion_check(st, ctx.tol["identity"]).checks)
        b = convlemma.conv_bound_check(st)
        rep.extend(b.checks)
        rep.data[st.name] = {"C": b.data["C"], "ratio": b.data["ratio"]}
    return rep


def cmd_aw_inner(ctx: Context) -> CheckReport:
    ctx.require("araki-woods", "aw-inner")
    model = ctx.model
    rep = aw.structure_checks(model, ctx.rng, ctx.tol["structure"])
    rep.extend(aw.ir_orthogonality_check(model, int(ctx.param("trials", 100)), ctx.rng, ctx.tol["ir"]).checks)
    return rep


def cmd_aw_modular(ctx: Context) -> CheckReport:
    ctx.require("araki-woods", "aw-modular")
    cap = int(ctx.param("cap", min(3, ctx.cfg.N // 2)))
    md = aw.modular_data(ctx.model, cap, ctx.tol["modular"])
    return md.report


def cmd_aw_centralizer(ctx: Context) -> CheckReport:
    ctx.require("araki-woods", "aw-centralizer")
    model = ctx.model
    inv = model.invariant_letters()
    if not inv:
        raise UnsupportedModeError("no A-invariant letter to use as xi0")
    trials = int(ctx.param("trials", 50))
    cap = int(ctx.param("degree_cap", min(3, ctx.cfg.N - 1)))
    rep = aw.centralizer_check(model, model.letter(inv[0]), trials, ctx.rng, cap, ctx.tol["centralizer"])
    others = [k for k in range(model.d) if k not in inv]
    if others:
        contrast = aw.centralizer_check(
            model, model.letter(others[0]), trials, ctx.rng, cap, ctx.tol["centralizer"], require_invariant=False
        )
        rep.add(
            Check(
                "centralizer/non-invariant-generator-fails",
                contrast.checks[0].lhs,
                ctx.tol["nontracial"],
                ctx.tol["nontracial"],
                contrast.checks[0].lhs > ctx.tol["nontracial"],
                note=f"letter {others[0]}",
            )
        )
    return rep


def _coeff(x) -> complex:
    return complex(str(x).replace(" ", "")) if isinstance(x, str) else complex(x)


def cmd_aw_thm44(ctx: Context) -> CheckReport:
    ctx.require("araki-woods", "aw-thm44")
    model = ctx.model
    witnesses = ctx.param("xi", [[1.0], [0.5, 1.0], [0.3, 0.8, 0.5]])
    rep = CheckReport()
    for k, coeffs in enumerate(witnesses):
        w = aw.make_witness(model, [_coeff(c) for c in coeffs])
        sub = aw.thm44_chain_check(model, w, ctx.tol["chain"])
        for c in sub.checks:
            c.name = f"{c.name}/xi{k}"
        rep.extend(sub.checks)
        rep.data[f"xi{k}"] = sub.data
    return rep


def cmd_aw_fixed(ctx: Context) -> CheckReport:
    ctx.require("araki-woods", "aw-fixed")
    model = ctx.model
    rep = CheckReport()
    top = int(ctx.param("max_level", min(ctx.cfg.N, 4)))
    for n in range(top + 1):
        fs = aw.fixed_vector_subspace(model, n)
        rep.extend(fs.report.checks)
        rep.data[f"level{n}"] = {"dimension": fs.basis.shape[1], "eigen_words": [list(w) for w in fs.eigen_words]}
    return rep


COMMANDS = {
    "gram": cmd_gram,
    "ops": cmd_ops,
    "commutator-decay": cmd_commutator_decay,
    "moments": cmd_moments,
    "trace-check": cmd_trace_check,
    "wick": cmd_wick,
    "commutant": cmd_commutant,
    "conv-check": cmd_conv_check,
    "aw-inner": cmd_aw_inner,
    "aw-modular": cmd_aw_modular,
    "aw-centralizer": cmd_aw_centralizer,
    "aw-thm44": cmd_aw_thm44,
    "aw-fixed": cmd_aw_fixed,
}


# -- reports --------------------------------------------------------------------------


def _clean(x):
    """Make ``x`` JSON-safe; non-finite numbers become ``None``."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"qfock": pkg, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def run(command: str, cfg: RunConfig, cache_dir: str | None = None) -> dict:
    """Execute one command and return the report mapping."""
    if cfg.precision == "exact" and command not in EXACT_COMMANDS:
        raise ConfigError("precision", f"exact mode is supported by {', '.join(EXACT_COMMANDS)} only")
    ctx = Context(cfg, cache_dir or cfg.cache)
    t0 = time.perf_counter()
    try:
        rep = COMMANDS[command](ctx)
    except QFockError as exc:
        rep = CheckReport([Check(f"{command}/error", 0.0, 0.0, 0.0, False, note=f"{type(exc).__name__}: {exc}")])
    elapsed = time.perf_counter() - t0
    checks = [c.to_dict() for c in rep.checks]
    return {
        "command": command,
        "config": _clean(cfg.echo()),
        "seed": cfg.seed,
        "tolerances": cfg.tolerances,
        "checks": checks,
        "pass": bool(checks) and all(c["pass"] for c in checks),
        "timings": {"total_s": elapsed},
        "versions": versions(),
        "cache_hits": ctx.cache_hits,
        "data": _clean(rep.data),
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfock", description="Truncated mixed q-Gaussian and q-Araki-Woods Fock space checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--cache")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--precision", choices=("float", "exact"))
    cp = sub.add_parser("cache")
    cp.add_argument("action", choices=("list", "verify", "purge"))
    cp.add_argument("--cache", required=True)
    cp.add_argument("--out")
    return p


def _emit(report: dict, out: str | None):
    text = json.dumps(report, indent=2, allow_nan=False)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "cache":
        rep = cache_admin(args.cache, args.action).to_dict()
        _emit(rep, args.out)
        return 0 if rep["pass"] or args.action != "verify" else 1
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = load_config(args.config, {"seed": args.seed, "precision": args.precision})
        report = run(args.command, cfg, args.cache)
    except ConfigError as exc:
        print(f"qfock: usage error: {exc}", file=sys.stderr)
        return 2
    _emit(report, args.out)
    if args.out:
        status = "PASS" if report["pass"] else "FAIL"
        print(f"{args.command}: {status} ({sum(c['pass'] for c in report['checks'])}/{len(report['checks'])} checks)")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
