"""starkforge command line: limit-formula, stark, theta-lift, shintani, ingest-check.

Every command writes versioned CSV tables (or plain text with --format text)
plus a provenance file into --out.  Reports are deterministic: rows are
computed per sample point (optionally in a process pool) and emitted in a
fixed order, and nothing run-dependent (wall time, cache status) goes into
them; wall time lands in a separate timing.json.
"""
import argparse
import csv
import functools
import hashlib
import io
import json
import logging
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence

import mpmath
import yaml
from mpmath import mp, mpc, mpf

from . import __version__
from .errors import ConvergenceError, SchemaError, StarkforgeError
from .mpkernel import PrecisionCtx

log = logging.getLogger("starkforge")

CSV_VERSION = "starkforge-csv/1"
CACHE_SCHEMA = 1
COMMANDS = ("limit-formula", "stark", "theta-lift", "shintani", "ingest-check")

# columns per table, documented in the README and stamped in each file header
COLUMNS = {
    "limit_formula": ["idx", "kind", "w", "h", "oracle", "abs_err", "rel_err"],
    "limit_formula_n": ["idx", "w", "h", "h_unit_shift", "self_consistency"],
    "ledger": ["class", "delta", "method", "cm_point", "kahler_t", "kahler_s"],
    "stark": ["class", "epsilon", "poly", "found", "algebraic_integer", "unit", "residual_log2"],
    "orbit": ["class", "orbit", "regular", "root_match"],
    "theta_lift": ["idx", "w", "lift", "reference", "reference_kind", "abs_diff"],
    "shintani_zeta": ["m", "cones", "functional", "abs_diff"],
    "lerch": ["x", "barnes", "stirling", "abs_diff"],
    "chowla_selberg": ["field", "w", "eta", "closed_form", "rel_err"],
    "reflection": ["z", "delta", "rhs_abs", "lhs", "extrapolated_abs", "flag"],
    "ingest": ["check", "value"],
}

CM_POINTS_Q = ["i", "(1+sqrt(-3))/2", "sqrt(-2)", "(1+sqrt(-7))/2", "sqrt(-3)",
               "(1+sqrt(-11))/2", "sqrt(-5)", "(1+sqrt(-15))/2", "sqrt(-6)", "(1+sqrt(-23))/4"]


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _fmt(x, digits: int) -> str:
    if isinstance(x, mpc) or isinstance(x, complex):
        x = mpc(x)
        im = mpmath.nstr(x.imag, digits)
        return "%s%s%sj" % (mpmath.nstr(x.real, digits), "" if im.startswith("-") else "+", im)
    if isinstance(x, (mpf, float)):
        return mpmath.nstr(x, digits)
    return str(x)


def _cm_point(expr: str, bits: int) -> mpc:
    with mp.workprec(bits + 32):
        s = expr.replace(" ", "")
        if s == "i":
            return mpc(0, 1)
        if s.startswith("sqrt(-"):
            return mpc(0, mpmath.sqrt(int(s[6:-1])))
        num, den = s.split("/")
        d = int(num[num.index("-") + 1:num.index(")")])
        return mpc(1, mpmath.sqrt(d)) / int(den)


def _random_points(seed: int, count: int, n: int, bits: int) -> List[List[mpc]]:
    rng = random.Random(seed)
    pts = []
    with mp.workprec(bits + 32):
        for _ in range(count):
            pts.append([mpc(mpf(rng.randint(-500, 500)) / 1000, mpf(rng.randint(700, 1600)) / 1000)
                        for _ in range(n)])
    return pts


@functools.lru_cache(maxsize=8)
def _field(sel: str, bits: int):
    from .fieldsdata import field_from_selector
    return field_from_selector(sel, PrecisionCtx(bits))


def _fingerprint(sel: str) -> str:
    if os.path.exists(sel):
        with open(sel, "rb") as fh:
            return "file:" + hashlib.sha256(fh.read()).hexdigest()
    if sel.startswith("golden:"):
        from .fieldsdata import golden_path
        with open(golden_path(sel[7:]), "rb") as fh:
            return sel + ":" + hashlib.sha256(fh.read()).hexdigest()
    return "builtin:" + sel


def _table(name: str, rows: Sequence[Sequence[str]], fmt: str) -> str:
    cols = COLUMNS[name]
    buf = io.StringIO()
    if fmt == "csv":
        buf.write("# %s table=%s\n" % (CSV_VERSION, name))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow(r)
    else:
        widths = [max(len(c), *(len(str(r[i])) for r in rows)) if rows else len(c) for i, c in enumerate(cols)]
        buf.write("%s (%s)\n" % (name, CSV_VERSION))
        buf.write("  ".join(c.ljust(wd) for c, wd in zip(cols, widths)).rstrip() + "\n")
        for r in rows:
            buf.write("  ".join(str(v).ljust(wd) for v, wd in zip(r, widths)).rstrip() + "\n")
    return buf.getvalue()


def _pmap(fn, items, workers: int):
    """Ordered map; results come back in item order whatever the pool size."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ------------------------------------------------------------------ per-point tasks
# top level so that the pool can pickle them; fields are rebuilt per worker

def _task_limit_q(item):
    idx, kind, w, bits = item
    from .eisen import FourierParams, h_total
    from .thetafun import dedekind_eta
    F = _field("rational", bits)
    ctx = PrecisionCtx(bits)
    w = mpc(*w) if isinstance(w, tuple) else w
    from .numfield import Ideal
    h = h_total(FourierParams(F, Ideal.unit(F.field), [w]), ctx)
    with mp.workprec(bits + 32):
        orc = -4 * mpmath.log(abs(dedekind_eta(w, ctx.with_bits(bits + 16))))
        err = abs(h - orc)
        return [str(idx), kind, _fmt(w, 20), _fmt(h, 30), _fmt(orc, 30), _fmt(err, 5), _fmt(err / abs(orc), 5)]


def _task_limit_n(item):
    idx, sel, w, bits = item
    from .eisen import FourierParams, h_total
    from .numfield import Ideal
    F = _field(sel, bits)
    ctx = PrecisionCtx(bits)
    u = F.totally_positive_unit()
    with mp.workprec(bits + 32):
        ue = F.embed(u, bits + 32)
        w2 = [ue[j] * w[j] for j in range(len(w))]
        h = h_total(FourierParams(F, Ideal.unit(F.field), w), ctx)
        h2 = h_total(FourierParams(F, Ideal.unit(F.field), w2), ctx)
        return [str(idx), ";".join(_fmt(z, 15) for z in w), _fmt(h, 30), _fmt(h2, 30), _fmt(abs(h - h2), 5)]


def _task_lift(item):
    idx, sel, w, bits = item
    from .borlift import jacobi_type_theta, lift_closed_form
    from .eisen import FourierParams, h_total
    from .numfield import Ideal
    from .thetafun import dedekind_eta
    F = _field(sel, bits)
    ctx = PrecisionCtx(bits)
    one = Ideal.unit(F.field)
    _, G = jacobi_type_theta(F, one)
    lift = lift_closed_form(G, w, ctx)
    with mp.workprec(bits + 32):
        if F.degree == 1:
            ref = -4 * mpmath.log(abs(dedekind_eta(w[0], ctx.with_bits(bits + 16))))
            kind = "eta"
        else:
            ref = h_total(FourierParams(F, one, w), ctx)
            kind = "eisen"
        return [str(idx), ";".join(_fmt(z, 15) for z in w), _fmt(lift, 30), _fmt(ref, 30), kind,
                _fmt(abs(lift - ref), 5)]


def _task_lerch(item):
    x, bits = item
    from .shintani import lerch_check
    a, b = lerch_check(x, PrecisionCtx(bits))
    with mp.workprec(bits + 32):
        return [_fmt(x, 10), _fmt(a, 30), _fmt(b, 30), _fmt(abs(a - b), 5)]


# ------------------------------------------------------------------ commands

def cmd_limit_formula(cfg) -> Dict[str, str]:
    bits = cfg.bits
    digits = 30
    if cfg.field in ("rational", "Q"):
        items = [(i, "cm", _cm_point(e, bits), bits) for i, e in enumerate(CM_POINTS_Q)]
        items += [(10 + i, "random", p[0], bits) for i, p in enumerate(_random_points(cfg.seed, 10, 1, bits))]
        rows = _pmap(_task_limit_q, items, cfg.workers)
        return {"limit_formula": _table("limit_formula", rows, cfg.format)}
    F = _field(cfg.field, bits)
    if not hasattr(F, "totally_positive_unit"):
        F = F.base
        sel = _base_selector(cfg.field, bits)
    else:
        sel = cfg.field
    pts = _random_points(cfg.seed, cfg.samples, F.degree, bits)
    rows = _pmap(_task_limit_n, [(i, sel, p, bits) for i, p in enumerate(pts)], cfg.workers)
    return {"limit_formula": _table("limit_formula_n", rows, cfg.format)}


def _base_selector(sel: str, bits: int) -> str:
    F = _field(sel, bits)
    if F.base.degree == 1:
        return "rational"
    return "real:%d" % F.base.disc


def cmd_stark(cfg) -> Dict[str, str]:
    from .idealmod import kahler_coords
    from .starkver import stark_pipeline
    K = _field(cfg.field, cfg.bits)
    if not hasattr(K, "class_group") or not hasattr(K, "base"):
        raise UsageError("stark needs a CM field (imag:d, golden:<name> or a field file)")
    ctx = PrecisionCtx(cfg.bits)
    res = stark_pipeline(K, ctx)
    led = res["ledger"]
    lrows = []
    for R in range(K.class_group.order):
        e = led[R]
        try:
            kc = kahler_coords(e.presentation.b_ideal, e.cm_point, K.base, cfg.convention)
            kt = ";".join(_fmt(mpf(t.numerator) / t.denominator if hasattr(t, "numerator") else t, 15) for t in kc.t)
            ks = ";".join(_fmt(s, 15) for s in kc.s)
        except StarkforgeError:
            kt = ks = "n/a"
        lrows.append([str(R), _fmt(e.delta, 40), e.method, ";".join(_fmt(z, 20) for z in e.cm_point), kt, ks])
    srows = []
    for R, rec in res["recognition"].items():
        with mp.workprec(cfg.bits):
            r2 = _fmt(mpmath.log(rec.residual, 2), 6) if rec.residual > 0 else "-inf"
        srows.append([str(R), _fmt(res["epsilon"][R], 40), rec.poly_str(), str(rec.found),
                      str(rec.is_algebraic_integer), str(rec.is_unit), r2])
    orows = []
    for R, ent in sorted(res["orbit"]["classes"].items()):
        orows.append([str(R), ";".join(ent["orbit"]), str(ent["regular"]), str(ent.get("root_match", "n/a"))])
    out = {"ledger": _table("ledger", lrows, cfg.format), "stark": _table("stark", srows, cfg.format),
           "orbit": _table("orbit", orows, cfg.format)}
    if res["h"] == 1:
        out["note"] = "h_K = 1: the ledger has a single class; no candidate units.\n"
    return out


def cmd_theta_lift(cfg) -> Dict[str, str]:
    bits = cfg.bits
    F = _field(cfg.field, bits)
    pts = _random_points(cfg.seed, cfg.samples, F.degree, bits)
    rows = _pmap(_task_lift, [(i, cfg.field, p, bits) for i, p in enumerate(pts)], cfg.workers)
    return {"theta_lift": _table("theta_lift", rows, cfg.format)}


def cmd_shintani(cfg) -> Dict[str, str]:
    from .shintani import (chowla_selberg_check, shintani_reflection_experiment, zeta_F_negative,
                           zeta_F_negative_functional)
    bits = cfg.bits
    ctx = PrecisionCtx(bits)
    F = _field(cfg.field, bits)
    out = {}
    zrows = []
    if F.degree == 2:
        for m in (2, 4):
            a = zeta_F_negative(F, m, ctx)
            b = zeta_F_negative_functional(F, m, ctx)
            with mp.workprec(bits + 32):
                zrows.append([str(m), _fmt(a, 30), _fmt(b, 30), _fmt(abs(a - b), 5)])
    out["shintani_zeta"] = _table("shintani_zeta", zrows, cfg.format)
    rng = random.Random(cfg.seed)
    xs = [mpf(rng.randint(1, 4000)) / 1000 for _ in range(10)]
    out["lerch"] = _table("lerch", _pmap(_task_lerch, [(x, bits) for x in xs], cfg.workers), cfg.format)
    crow = [[r["field"], r["w"], _fmt(r["eta"], 30), _fmt(r["closed_form"], 30), _fmt(r["rel_err"], 5)]
            for r in chowla_selberg_check(ctx)]
    out["chowla_selberg"] = _table("chowla_selberg", crow, cfg.format)
    if F.degree == 2:
        ex = shintani_reflection_experiment(mpf(1) / 2, F, PrecisionCtx(min(bits, 96)))
        rrows = [[_fmt(ex["z"], 10), _fmt(d, 5), _fmt(abs(v), 20), _fmt(ex["lhs"], 20),
                  _fmt(abs(ex["rhs_extrapolated"]), 20), ex["flag"] or "ok"]
                 for d, v in zip(ex["deltas"], ex["rhs_by_delta"])]
        out["reflection"] = _table("reflection", rrows, cfg.format)
    return out


def cmd_ingest_check(cfg) -> Dict[str, str]:
    from .fieldsdata import CMField, ingest_field_file
    from .idealmod import verify_classgroup_generation
    sel = cfg.field
    if sel in ("rational", "Q") or sel.startswith(("real:", "imag:", "golden:")):
        K = _field(sel, cfg.bits)
    else:
        if not os.path.exists(sel):
            raise SchemaError("field file %r does not exist" % sel)
        K = ingest_field_file(sel, PrecisionCtx(cfg.bits))
    rows = [["fingerprint", _fingerprint(sel)]]
    if isinstance(K, CMField):
        rows += [["name", K.name], ["degree", str(K.field.degree)], ["disc", str(K.disc)],
                 ["class_number", str(K.class_group.order)], ["roots_of_unity", str(K.w)],
                 ["unit_index", str(K.unit_index)], ["base_disc", str(K.base.disc)],
                 ["base_regulator", _fmt(K.base.regulator(PrecisionCtx(cfg.bits)), 30)]]
        if K.reflex is not None:
            g = verify_classgroup_generation(K)
            rows.append(["real_imaginary_generation", str(g["generated"])])
    else:
        rows += [["degree", str(K.degree)], ["disc", str(K.disc)], ["class_number", str(K.h)]]
    return {"ingest": _table("ingest", rows, cfg.format)}


HANDLERS = {"limit-formula": cmd_limit_formula, "stark": cmd_stark, "theta-lift": cmd_theta_lift,
            "shintani": cmd_shintani, "ingest-check": cmd_ingest_check}

DEFAULT_FIELD = {"limit-formula": "rational", "stark": "imag:23", "theta-lift": "rational",
                 "shintani": "real:5", "ingest-check": "golden:quartic"}


# ------------------------------------------------------------------ plumbing

def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS: options may sit before or after the command without clobbering each other
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--field", help="rational | real:D | imag:d | golden:<name> | path to a field file")
    common.add_argument("--bits", type=int, help="working precision (>= 64, default 128)")
    common.add_argument("--seed", type=int, help="seed for sampled points (default 20240611)")
    common.add_argument("--samples", type=int, help="random sample points (default 3)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--cache", help="cache directory; STARKFORGE_CACHE overrides it")
    common.add_argument("--convention", choices=["index", "index_over_disc"])
    common.add_argument("--workers", type=int, help="process pool size (default 1)")
    common.add_argument("--format", choices=["csv", "text"])
    common.add_argument("--config", help="YAML file with any of the options above")
    p = argparse.ArgumentParser(prog="starkforge", parents=[common], description="High-precision limit formulas, theta lifts "
                                "and Stark-unit checks for CM fields.")
    p.add_argument("--version", action="version", version="starkforge " + __version__)
    sub = p.add_subparsers(dest="command")
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    return p


DEFAULTS = {"bits": 128, "seed": 20240611, "samples": 3, "out": ".", "cache": None,
            "convention": "index", "workers": 1, "format": "csv"}


def _resolve(ns) -> argparse.Namespace:
    conf = {}
    if getattr(ns, "config", None):
        if not os.path.exists(ns.config):
            raise SchemaError("config file %r does not exist" % ns.config)
        with open(ns.config) as fh:
            conf = yaml.safe_load(fh) or {}
        if not conf:
            raise UsageError("empty config")
        if not isinstance(conf, dict):
            raise SchemaError("config must be a mapping")
        unknown = set(conf) - set(DEFAULTS) - {"field", "command"}
        if unknown:
            raise SchemaError("unknown config keys: %s" % ", ".join(sorted(unknown)))
    cfg = argparse.Namespace(command=getattr(ns, "command", None) or conf.get("command"))
    if cfg.command not in COMMANDS:
        raise UsageError("no command")
    for k, d in list(DEFAULTS.items()) + [("field", DEFAULT_FIELD[cfg.command])]:
        v = getattr(ns, k, None)
        setattr(cfg, k, v if v is not None else conf.get(k, d))
    env = os.environ.get("STARKFORGE_CACHE")
    if env:
        cfg.cache = env
    if int(cfg.bits) < 64:
        raise SchemaError("precision must be at least 64 bits")
    cfg.bits, cfg.seed, cfg.workers, cfg.samples = int(cfg.bits), int(cfg.seed), max(1, int(cfg.workers)), int(cfg.samples)
    return cfg


def _cache_key(cfg) -> str:
    key = {"schema": CACHE_SCHEMA, "csv": CSV_VERSION, "version": __version__, "command": cfg.command,
           "field": _fingerprint(cfg.field), "bits": cfg.bits, "tail_tol_bits": cfg.bits,
           "seed": cfg.seed, "samples": cfg.samples, "convention": cfg.convention, "format": cfg.format}
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()


def _provenance(cfg) -> str:
    tags = {"limit-formula": "Fourier expansion of h(w; a) vs eta q-product",
            "stark": "delta ledger -> eps(R) -> LLL recognition -> orbit check",
            "theta-lift": "unfolded lift of the Jacobi-type theta vs Fourier h",
            "shintani": "cone zeta at negative integers, Barnes Gamma_2, Lerch, Chowla-Selberg",
            "ingest-check": "schema and consistency checks"}
    prov = {"format": CSV_VERSION, "command": cfg.command, "formula": tags[cfg.command],
            "field": cfg.field, "field_fingerprint": _fingerprint(cfg.field), "precision_bits": cfg.bits,
            "tail_tol": "2^-%d" % cfg.bits, "truncation": "tail bound below tail_tol (per point)",
            "seed": cfg.seed, "samples": cfg.samples, "convention": cfg.convention,
            "starkforge": __version__}
    return yaml.safe_dump(prov, sort_keys=True)


def _write(outdir: str, files: Dict[str, str], ext: str) -> List[str]:
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, text in sorted(files.items()):
        p = os.path.join(outdir, "%s.%s" % (name, ext if name not in ("note", "provenance") else
                                             ("txt" if name == "note" else "yaml")))
        with open(p, "w", newline="") as fh:
            fh.write(text)
        paths.append(p)
    return paths


def run(cfg) -> List[str]:
    t0 = time.perf_counter()
    ext = "csv" if cfg.format == "csv" else "txt"
    files = None
    cpath = None
    if cfg.cache:
        cpath = os.path.join(cfg.cache, _cache_key(cfg) + ".json")
        if os.path.exists(cpath):
            with open(cpath) as fh:
                files = json.load(fh)
            log.info("cache hit %s", cpath)
    if files is None:
        files = HANDLERS[cfg.command](cfg)
        files["provenance"] = _provenance(cfg)
        if cpath:
            os.makedirs(cfg.cache, exist_ok=True)
            tmp = cpath + ".tmp"
            with open(tmp, "w") as fh:
                json.dump(files, fh, sort_keys=True)
            os.replace(tmp, cpath)
    paths = _write(cfg.out, files, ext)
    with open(os.path.join(cfg.out, "timing.json"), "w") as fh:
        json.dump({"command": cfg.command, "wall_time_s": round(time.perf_counter() - t0, 3)}, fh)
    return paths


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    ns = parser.parse_args(argv)
    try:
        cfg = _resolve(ns)
        for p in run(cfg):
            print(p)
        return 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print("starkforge: %s" % exc, file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print("starkforge: convergence failure: %s" % exc, file=sys.stderr)
        return 2
    except (SchemaError, FileNotFoundError) as exc:
        print("starkforge: schema error: %s" % exc, file=sys.stderr)
        return 3
    except StarkforgeError as exc:
        print("starkforge: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
