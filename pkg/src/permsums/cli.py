"""Command-line front end: ``permlab <subcommand> [flags]``.

stdout carries one JSON object (or CSV rows); diagnostics go to stderr.
Exit codes: 0 ok, 1 failing acceptance criteria, 2 domain error, 3 capacity
or resource error, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import gfun, measures, permlab, sumstats, verify, walks
from .errors import CapacityError, DomainError, ResourceError
from .processes import sample_lower_process, sample_upper_process
from .rngkit import DEFAULT_BLOCKS, StreamSeed

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_CAPACITY, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# serialization

def _to_plain(x):
    if isinstance(x, dict):
        return {str(k): _to_plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _to_plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, complex):
        return {"real": x.real, "imag": x.imag}
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, StreamSeed):
        return {"master_seed": int(x.master_seed), "stream_id": int(x.stream_id)}
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_dict"):
        return _to_plain(x.to_dict())
    return str(x)


def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    s = f"{v:.17g}"
    if all(c not in s for c in ".eEn"):
        s += ".0"
    return s


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    obj = _to_plain(obj)

    def enc(x):
        if isinstance(x, dict):
            return "{" + ", ".join(f"{json.dumps(k)}: {enc(v)}" for k, v in x.items()) + "}"
        if isinstance(x, list):
            return "[" + ", ".join(enc(v) for v in x) + "]"
        if isinstance(x, bool) or x is None:
            return json.dumps(x)
        if isinstance(x, float):
            return _fmt_float(x)
        return json.dumps(x)

    return enc(obj)


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, list) and not all(isinstance(v, (dict, list)) for v in obj):
        yield prefix.rstrip("."), ";".join(_cell(v) for v in obj)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), _cell(obj)


def _cell(v) -> str:
    if isinstance(v, float):
        return _fmt_float(v) if math.isfinite(v) else ""
    if v is None:
        return ""
    if isinstance(v, (dict, list)):
        return dumps(v)
    return str(v)


def to_csv(payload) -> str:
    """A table when the payload has a list of flat ``rows``, else key,value pairs."""
    obj = _to_plain(payload)
    buf = io.StringIO()
    w = csv.writer(buf)  # RFC 4180: minimal quoting, CRLF line ends
    rows = obj.get("rows") if isinstance(obj, dict) else None
    if isinstance(rows, list) and rows and all(isinstance(r, dict) for r in rows):
        cols = list(rows[0].keys())
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(obj):
            w.writerow([k, v])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# run records

def build_id() -> str:
    """Hash of the package sources; stable across runs of the same code."""
    h = hashlib.sha1()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


@dataclass
class RunRecord:
    command: str
    params: dict
    seed: int
    build: str
    wall_time_s: float
    results: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "build": self.build,
                "seed": self.seed, "wall_time_s": self.wall_time_s, "results": self.results}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["command"], dict(d["params"]), int(d["seed"]), d["build"],
                   float(d["wall_time_s"]), d.get("results", {}))

    def argv(self) -> list[str]:
        """Command line that reproduces this record's payload."""
        out = [self.command]
        for k, v in self.params.items():
            if v is None or v is False:
                continue
            flag = "--" + k.replace("_", "-")
            if v is True:
                out.append(flag)
            else:
                out.append(f"{flag}={v}")  # '=' keeps values like -1,0 from parsing as flags
        return out


def replay(record: RunRecord) -> dict:
    """Re-run a record's command and return the fresh payload."""
    args = build_parser().parse_args(record.argv())
    return _to_plain(COMMANDS[args.command](args))


# ---------------------------------------------------------------------------
# argument helpers

def _positive(name):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {s!r}")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return v
    return conv


def _nonneg(name):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {s!r}")
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0")
        return v
    return conv


def _seed(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {s!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _int_list(s):
    try:
        vals = [int(t) for t in s.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(s):
    try:
        vals = [float(t) for t in s.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("expected finite numbers")
    return vals


def _mc_kw(args) -> dict:
    return {"threads": args.threads, "n_blocks": args.blocks}


def _est(e) -> dict:
    return {"mean": e.mean, "std_error": e.std_error, "n_samples": e.n_samples}


# ---------------------------------------------------------------------------
# commands

def cmd_pk_exact(a):
    return {"k": a.k, "p_k": permlab.pk_exact_small(a.k)}


def cmd_pk_mc(a):
    e = permlab.pk_mc(a.k, a.samples, a.seed, **_mc_kw(a))
    return {"k": a.k, "p_k": e.mean, "std_error": e.std_error, "n_samples": e.n_samples}


def cmd_ink_exact(a):
    v = permlab.i_nk_exact(a.n, a.k)
    return {"n": a.n, "k": a.k, "i_nk": v, "i_nk_float": float(v)}


def cmd_ink_mc(a):
    e = permlab.i_nk_mc(a.n, a.k, a.samples, a.seed, **_mc_kw(a))
    return {"n": a.n, "k": a.k, "i_nk": e.mean, "std_error": e.std_error, "n_samples": e.n_samples}


def cmd_change_measure(a):
    return permlab.change_of_measure_check(a.k, a.samples, a.seed, **_mc_kw(a)).to_dict()


def cmd_walk_h(a):
    e = walks.h_estimate(a.kind, a.m, a.N, a.samples, a.seed, **_mc_kw(a))
    try:
        closed = walks.h_closed_form(a.kind, a.m)
    except DomainError:
        closed = None
    return {"kind": a.kind, "m": a.m, "N": a.N, "h": e.mean, "std_error": e.std_error,
            "n_samples": e.n_samples, "closed_form": closed}


def cmd_walk_llt(a):
    r = walks.llt_check(a.kind, a.m, a.N, a.samples, a.seed, method=a.method, **_mc_kw(a))
    return r.to_dict()


def cmd_walk_ladder(a):
    return walks.ladder_and_renewal_check(a.samples, a.seed, cap=a.cap, **_mc_kw(a)).to_dict()


def cmd_walk_borel(a):
    return {"terms": a.terms, "partial_sum": walks.borel_identity_check(a.terms)}


def cmd_rho(a):
    if a.values is not None:
        u = np.array(a.values, dtype=float)
        if u.size < 1:
            raise DomainError("need at least one exponent")
        u.sort()
        src = "given"
    else:
        proc = sample_upper_process(4 * a.ell + 40, StreamSeed(a.seed, 0).child("cli-rho"))
        u = proc.sorted_arrivals()
        if u.size < a.ell:
            raise DomainError("sampled process too short; try another seed")
        u = u[:a.ell]
        src = "sampled"
    ell = u.size
    raw = sumstats.rho_raw_count(sumstats.RhoInput(u, w=float(u[-1]), z=0.0), a.engine)
    return {"ell": ell, "source": src, "exponents": u, "count": raw,
            "rho": raw * 2.0 ** (float(u[-1]) - ell)}


def cmd_tau(a):
    if a.values is not None:
        x = np.sort(np.array(a.values, dtype=np.int64))
        src = "given"
    else:
        proc = sample_lower_process(4 * a.ell + 40, StreamSeed(a.seed, 0).child("cli-tau"))
        if proc.x.size < a.ell:
            raise DomainError("sampled process too short; try another seed")
        x = np.sort(proc.x)[:a.ell]
        src = "sampled"
    inp = sumstats.TauInput(x, z=-float(x.size))
    raw = sumstats.tau_raw_count(inp, a.engine)
    return {"ell": int(x.size), "source": src, "values": x, "distinct_sums": raw,
            "tau": raw * 2.0 ** (-x.size)}


def cmd_gfun_eval(a):
    xs = a.x
    vals = gfun.g_eval(np.array(xs))
    return {"rows": [{"x": x, "g": float(v)} for x, v in zip(xs, vals)]}


def cmd_gfun_fourier(a):
    v = gfun.g_hat(a.m)
    return {"m": a.m, "real": v.real, "imag": v.imag, "abs": abs(v),
            "decay_bound": gfun.decay_bound(a.m)}


def cmd_gfun_ratio(a):
    return {"grid": a.grid, "ratio_minus_one": gfun.g_ratio(a.grid)}


def cmd_thinning(a):
    e = gfun.thinning_mc(a.k, a.samples, a.seed, **_mc_kw(a))
    d = gfun.thinning_days_mc(a.k, a.samples, a.seed, **_mc_kw(a))
    t = math.log2(a.k) % 1.0
    return {"k": a.k, "p_hit": _est(e), "days_at_one": _est(d), "g0": gfun.g0_eval(t),
            "t": t}


def _modes(a):
    return sorted(set(a.m_mode))


def cmd_mu_fourier(a):
    tab = measures.mu_hat_table(_modes(a), a.ell, a.samples, a.seed, **_mc_kw(a))
    return {"ell": a.ell, "rows": [{"r": r, "real": e.real.mean, "imag": e.imag.mean,
                                    "std_error_real": e.real.std_error,
                                    "std_error_imag": e.imag.std_error, "n_samples": e.n_samples}
                                   for r, e in tab.items()]}


def cmd_muprime_fourier(a):
    tab = measures.mu_prime_hat_table(_modes(a), a.ell, a.samples, a.seed, **_mc_kw(a))
    return {"ell": a.ell, "rows": [{"r": r, "real": e.real.mean, "imag": e.imag.mean,
                                    "std_error_real": e.real.std_error,
                                    "std_error_imag": e.imag.std_error, "n_samples": e.n_samples}
                                   for r, e in tab.items()]}


def cmd_predict_f(a):
    M = a.max_mode
    rs = list(range(-M, M + 1))
    ell_tau = a.ell_tau if a.ell_tau is not None else a.ell
    mu = measures.mu_hat_table(rs, a.ell, a.samples, a.seed, **_mc_kw(a))
    mp = measures.mu_prime_hat_table(rs, ell_tau, a.samples, a.seed, **_mc_kw(a))
    p = measures.predict_f(mu, mp, gfun.FourierTable.build(M), xi=np.arange(a.grid) / a.grid, M=M)
    return {"stat_error": p.stat_error, "truncation_error": p.truncation_error,
            "max_imag": p.max_imag,
            "rows": [{"xi": x, "f": f} for x, f in zip(p.xi.tolist(), p.f.tolist())]}


def cmd_paradigm_check(a):
    return measures.poisson_paradigm_check(a.k, a.pairs, a.inner, a.ell, a.seed).to_dict()


def cmd_end_to_end(a):
    rows = measures.end_to_end_ratio(a.k_list, a.samples, a.seed, **_mc_kw(a))
    return {"rows": [{"k": r.k, "xi": r.xi, "p_hat": r.p_hat.mean,
                      "p_hat_std_error": r.p_hat.std_error, "ratio": r.ratio,
                      "ratio_std_error": r.ratio_se} for r in rows]}


def cmd_verify_all(a):
    def progress(res):
        print(res.line(), file=sys.stderr, flush=True)

    results = verify.verify_all(a.budget, only=a.only, seed=a.seed, progress=progress)
    gating_ok = all(r.passed for r in results)
    return {"budget_seconds": a.budget, "all_gating_passed": gating_ok,
            "criteria": [r.to_dict() for r in results],
            "rows": [{"id": r.id, "status": r.status, "title": r.title, "seconds": r.seconds}
                     for r in results]}


COMMANDS = {
    "pk-exact": cmd_pk_exact, "pk-mc": cmd_pk_mc, "ink-exact": cmd_ink_exact,
    "ink-mc": cmd_ink_mc, "change-measure": cmd_change_measure, "walk-h": cmd_walk_h,
    "walk-llt": cmd_walk_llt, "walk-ladder": cmd_walk_ladder, "walk-borel": cmd_walk_borel,
    "rho": cmd_rho, "tau": cmd_tau, "gfun-eval": cmd_gfun_eval, "gfun-fourier": cmd_gfun_fourier,
    "gfun-ratio": cmd_gfun_ratio, "thinning": cmd_thinning, "mu-fourier": cmd_mu_fourier,
    "muprime-fourier": cmd_muprime_fourier, "predict-f": cmd_predict_f,
    "paradigm-check": cmd_paradigm_check, "end-to-end": cmd_end_to_end,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--threads", type=_positive("threads"), default=None,
                        help="worker threads (speed only; falls back to PERMLAB_THREADS)")
    common.add_argument("--blocks", type=_positive("blocks"), default=DEFAULT_BLOCKS)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="also write a RunRecord JSON to this file")

    p = _Parser(prog="permlab", description="Random permutation invariant-set laboratory.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help, samples=None):
        sp = sub.add_parser(name, parents=[common], help=help)
        if samples is not None:
            sp.add_argument("--samples", type=_positive("samples"), default=samples)
        return sp

    s = add("pk-exact", "exact p(k) for k <= 20")
    s.add_argument("--k", type=_positive("k"), required=True)
    s = add("pk-mc", "Monte Carlo p(k)", 10 ** 5)
    s.add_argument("--k", type=_positive("k"), required=True)
    s = add("ink-exact", "exact i(n, k) as a fraction")
    s.add_argument("--n", type=_positive("n"), required=True)
    s.add_argument("--k", type=_nonneg("k"), required=True)
    s = add("ink-mc", "Monte Carlo i(n, k)", 10 ** 5)
    s.add_argument("--n", type=_positive("n"), required=True)
    s.add_argument("--k", type=_nonneg("k"), required=True)
    s = add("change-measure", "p(k) against the rescaled model-A expression", 10 ** 5)
    s.add_argument("--k", type=_positive("k"), default=2 ** 10)
    for name, help in (("walk-h", "N^(1/2) P(walk stays >= -m)"),
                       ("walk-llt", "conditioned endpoint law against the Rayleigh profile")):
        s = add(name, help, 10 ** 5)
        s.add_argument("--kind", choices=walks.KINDS, default="upper")
        s.add_argument("--m", type=int, default=0)
        s.add_argument("--N", type=_positive("N"), default=10 ** 4 if name == "walk-h" else 1600)
    s.add_argument("--method", choices=("rejection", "exact"), default="exact")
    s = add("walk-ladder", "ladder height and renewal sums", 10 ** 5)
    s.add_argument("--cap", type=_positive("cap"), default=10 ** 6)
    s = add("walk-borel", "partial sums of the Borel identity")
    s.add_argument("--terms", type=_positive("terms"), default=10 ** 6)
    s = add("rho", "rho_u(l) for given or sampled exponents")
    s.add_argument("--ell", type=_positive("ell"), default=20)
    s.add_argument("--values", type=_float_list, default=None)
    s.add_argument("--engine", choices=("auto", "brute", "mitm"), default="auto")
    s = add("tau", "tau_x(l) for given or sampled values")
    s.add_argument("--ell", type=_positive("ell"), default=20)
    s.add_argument("--values", type=_int_list, default=None)
    s.add_argument("--engine", choices=("auto", "brute", "bitset", "split"), default="auto")
    s = add("gfun-eval", "evaluate g")
    s.add_argument("--x", type=_float_list, default=[0.0])
    s = add("gfun-fourier", "Fourier coefficient of g")
    s.add_argument("--m", type=int, default=0)
    s = add("gfun-ratio", "max g / min g - 1 on a grid")
    s.add_argument("--grid", type=_positive("grid"), default=10 ** 5)
    s = add("thinning", "binomial thinning simulation", 10 ** 5)
    s.add_argument("--k", type=_positive("k"), default=2 ** 16)
    s = add("mu-fourier", "Fourier coefficients of mu", 10 ** 4)
    s.add_argument("--m-mode", type=_int_list, default=[0])
    s.add_argument("--ell", type=_positive("ell"), default=measures.DEFAULT_ELL_RHO)
    s = add("muprime-fourier", "Fourier coefficients of mu'", 10 ** 4)
    s.add_argument("--m-mode", type=_int_list, default=[0])
    s.add_argument("--ell", type=_positive("ell"), default=measures.DEFAULT_ELL_TAU)
    s = add("predict-f", "f = c0 g * mu * mu' on a grid", 10 ** 4)
    s.add_argument("--max-mode", type=_nonneg("max-mode"), default=measures.MODE_MAX)
    s.add_argument("--ell", type=_positive("ell"), default=measures.DEFAULT_ELL_RHO)
    s.add_argument("--ell-tau", type=_positive("ell-tau"), default=None)
    s.add_argument("--grid", type=_positive("grid"), default=20)
    s = add("paradigm-check", "membership probability against the Poisson-paradigm formula")
    s.add_argument("--k", type=_positive("k"), default=2 ** 18)
    s.add_argument("--pairs", type=_positive("pairs"), default=50)
    s.add_argument("--inner", type=_positive("inner"), default=200)
    s.add_argument("--ell", type=_positive("ell"), default=20)
    s = add("end-to-end", "p_hat(k) k^delta (log k)^(3/2)", 10 ** 5)
    s.add_argument("--k-list", type=_int_list, default=[2 ** 10, 2 ** 12, 2 ** 14])
    s = add("verify-all", "run the acceptance suite")
    s.add_argument("--budget", type=float, default=verify.FULL_SUITE_SECONDS)
    s.add_argument("--only", type=_int_list, default=None)
    return p


def _validate(a):
    """Range checks that argparse types cannot express."""
    if a.command in ("walk-h", "walk-llt") and a.m < (-1 if a.command == "walk-h" else 0):
        raise DomainError("m out of range")
    if a.command == "gfun-fourier" and abs(a.m) > gfun.G_HAT_MAX_MODE:
        raise DomainError(f"|m| must be <= {gfun.G_HAT_MAX_MODE}")
    if a.command == "verify-all":
        if not math.isfinite(a.budget) or a.budget < 60:
            raise DomainError("budget must be >= 60 seconds")
        known = {c[0] for c in verify.CRITERIA}
        if a.only is not None and not set(a.only) <= known:
            raise DomainError(f"--only must list criteria among {sorted(known)}")
    if a.command in ("mu-fourier", "muprime-fourier") and any(abs(r) > 64 for r in a.m_mode):
        raise DomainError("modes must satisfy |r| <= 64")
    if a.command == "predict-f" and a.max_mode > gfun.G_HAT_MAX_MODE:
        raise DomainError(f"max-mode must be <= {gfun.G_HAT_MAX_MODE}")
    if a.command == "end-to-end" and any(k < 2 for k in a.k_list):
        raise DomainError("k-list entries must be >= 2")


def _params(a) -> dict:
    skip = {"command", "format", "out"}
    return {k: v for k, v in vars(a).items() if k not in skip}


def _param_str(v):
    if isinstance(v, list):
        return ",".join(str(t) for t in v)
    return v


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    t0 = time.perf_counter()
    try:
        _validate(args)
        payload = _to_plain(COMMANDS[args.command](args))
    except DomainError as e:
        print(f"permlab: domain error: {e}", file=stderr)
        return EXIT_DOMAIN
    except (CapacityError, ResourceError) as e:
        print(f"permlab: capacity error: {e}", file=stderr)
        return EXIT_CAPACITY
    wall = time.perf_counter() - t0
    stdout.write(to_csv(payload) if args.format == "csv" else dumps(payload) + "\n")
    if args.out:
        rec = RunRecord(args.command, {k: _param_str(v) for k, v in _params(args).items()},
                        args.seed, build_id(), wall, payload)
        Path(args.out).write_text(dumps(rec.to_dict()) + "\n")
    print(f"permlab: {args.command} done in {wall:.3f}s", file=stderr)
    if args.command == "verify-all" and not payload["all_gating_passed"]:
        return EXIT_FAIL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
