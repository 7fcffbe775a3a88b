"""``measim`` command line: rates, protocol simulation and lemma suites.

Exit codes: 0 ok, 1 usage or parse error, 2 verification failure, 3 size
limit. Stdout carries one JSON document per invocation unless ``--csv``.
"""

from __future__ import annotations

import csv
import io as _io
import hashlib
import os
import sys
import time
import warnings

import click
import numpy as np

from measim import __version__
from measim import bounds, rates
from measim import tolerances as tol
from measim.errors import MeasimError, ParseError, SizeLimit
from measim.io import dumps_report, load_problem, read_text
from measim.protocol import simulate_cdcqsi, simulate_mc, simulate_mc_instr, simulate_mcqsi, simulate_nonfeedback

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_SIZE = 0, 1, 2, 3

THEOREMS = ("mc", "instrument", "nonfeedback", "cdcqsi", "mcqsi", "mcqsi-nonfeedback", "uncertainty")
PROTOCOLS = ("mc", "mc-instr", "nonfeedback", "cdcqsi", "mcqsi")
SUITES = ("gentle", "gentle-ensemble", "sen", "chernoff", "trace-ineq", "entropy-close", "equivalence")


class _Emit:
    """Holds the echo and timer for the single report an invocation writes."""

    def __init__(self, argv):
        self.argv = list(argv)
        self.start = time.perf_counter()

    def report(self, command: str, seed, result: dict, checks: dict, extra: dict | None, timing: bool) -> dict:
        rep = {
            "command": {"name": command, "argv": self.argv},
            "version": __version__,
            "seed": seed,
            "tolerances": tol.as_dict(),
            "result": result,
            "checks": checks,
        }
        if extra:
            rep.update(extra)
        if timing:
            rep["wall_clock_s"] = time.perf_counter() - self.start
        return rep


def _input_info(path: str) -> dict:
    text = read_text(path)
    return {"path": path, "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest()}


def _pick(section: dict, name: str | None, what: str) -> str:
    if name is not None:
        if name not in section:
            raise click.UsageError(f"no {what} named {name!r}; file has {sorted(section)}")
        return name
    if not section:
        raise click.UsageError(f"input file has no {what}")
    return next(iter(section))


def _write(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _default_threads() -> int:
    return os.cpu_count() or 1


def _problem(path: str):
    try:
        return load_problem(path)
    except FileNotFoundError as exc:
        raise ParseError(path, "file not found") from exc


@click.group()
@click.version_option(__version__, prog_name="measim")
def cli():
    """Measurement compression at desk scale."""


@cli.command("rates")
@click.argument("input_path", metavar="INPUT")
@click.option("--theorem", type=click.Choice(THEOREMS), required=True)
@click.option("--state", default=None, help="State name (default: first in file).")
@click.option("--povm", default=None, help="POVM name; the target POVM for refinements.")
@click.option("--povm-z", default=None, help="Second POVM for the uncertainty bounds.")
@click.option("--instrument", default=None)
@click.option("--ensemble", default=None)
@click.option("--refinement", "refinement_names", multiple=True, help="Refinement name; repeat for a union.")
@click.option("--output", default=None, help="Write the report here instead of stdout.")
@click.option("--timing", is_flag=True, help="Include wall-clock time (breaks byte-identity).")
@click.pass_obj
def cmd_rates(emit, input_path, theorem, state, povm, povm_z, instrument, ensemble, refinement_names, output, timing):
    """Single-letter rate regions for a problem file."""
    pf = _problem(input_path)
    sel: dict = {}
    if theorem == "cdcqsi":
        sel["ensemble"] = _pick(pf.ensembles, ensemble, "ensembles")
        ens = pf.ensemble(sel["ensemble"])
        h = rates.cdc_qsi_rate(ens)
        result = {"rate": h, "H(X|B)": h}
    else:
        sel["state"] = _pick(pf.states, state, "states")
        rho, lay = pf.state(sel["state"])
        if theorem == "mc":
            sel["povm"] = _pick(pf.povms, povm, "povms")
            result = rates.mc_feedback_region(rho, pf.povm(sel["povm"])).to_dict()
        elif theorem == "instrument":
            sel["instrument"] = _pick(pf.instruments, instrument, "instruments")
            region, breakdown = rates.instrument_feedback_rates(rho, pf.instrument(sel["instrument"]))
            result = {**region.to_dict(), "breakdown": breakdown}
        elif theorem in ("nonfeedback", "mcqsi-nonfeedback"):
            names = list(refinement_names) or list(pf.refinements)
            for n in names:
                _pick(pf.refinements, n, "refinements")
            sel["refinements"] = names
            refs = [pf.refinement(n) for n in names]
            target = None
            if povm is not None:
                sel["povm"] = _pick(pf.povms, povm, "povms")
                target = pf.povm(povm)
            if theorem == "nonfeedback":
                result = rates.mc_nonfeedback_region(rho, refs, target).to_dict()
            else:
                result = rates.mcqsi_nonfeedback_region(rho, lay, refs, target).to_dict()
        elif theorem == "mcqsi":
            sel["povm"] = _pick(pf.povms, povm, "povms")
            result = rates.mcqsi_feedback_region(rho, lay, pf.povm(sel["povm"])).to_dict()
        else:
            sel["povm"] = _pick(pf.povms, povm, "povms")
            if povm_z is None:
                raise click.UsageError("--povm-z is required for the uncertainty bounds")
            sel["povm_z"] = _pick(pf.povms, povm_z, "povms")
            result = rates.uncertainty_bounds(rho, lay, pf.povm(sel["povm"]), pf.povm(povm_z)).to_dict()
    checks = {}
    if "corner" in result and "constraints" in result:
        r, s = result["corner"]["R"], result["corner"]["S"]
        checks["corner_feasible"] = all(c["a"] * r + c["b"] * s - c["value"] >= -tol.TOL_ENTROPY for c in result["constraints"])
    if theorem == "uncertainty":
        checks["cost_bound"] = result["cost_ok"]
        checks["cr_bound"] = result["cr_ok"]
    rep = emit.report(
        "rates",
        None,
        {"theorem": theorem, "selection": sel, **result},
        checks,
        {"input": _input_info(input_path)},
        timing,
    )
    _write(dumps_report(rep), output)
    return EXIT_OK


def parse_series(spec: str) -> tuple[str, list]:
    """``n=2..8``, ``n=2..8:2`` or ``L=1,2,4,8``."""
    if "=" not in spec:
        raise click.UsageError(f"series {spec!r} must look like name=start..stop[:step] or name=v1,v2")
    key, rng = spec.split("=", 1)
    key = key.strip()
    if key not in ("n", "L", "M", "R"):
        raise click.UsageError(f"series parameter must be one of n, L, M, R; got {key!r}")
    cast = float if key == "R" else int
    try:
        if ".." in rng:
            body, _, step = rng.partition(":")
            a, b = body.split("..")
            st = cast(step) if step else cast(1)
            vals, v = [], cast(a)
            while v <= cast(b) + (1e-12 if cast is float else 0):
                vals.append(v)
                v = v + st
        else:
            vals = [cast(t) for t in rng.split(",") if t.strip()]
    except ValueError as exc:
        raise click.UsageError(f"cannot parse series {spec!r}: {exc}") from exc
    if not vals:
        raise click.UsageError(f"series {spec!r} is empty")
    return key, vals


def _nonincreasing(values: list[float], slack: float = 0.0) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def _run_protocol(protocol: str, pf, sel: dict, p: dict) -> tuple[dict, dict]:
    """One simulation; returns the full result and a flat CSV row."""
    common = dict(delta=p["delta"], trials=p["trials"], seed=p["seed"], threads=p["threads"])
    if protocol == "cdcqsi":
        ens = pf.ensemble(sel["ensemble"])
        r = simulate_cdcqsi(ens, p["n"], p["R"], recover=p["recover"], **common)
        d = r.to_dict()
        row = {k: d[k] for k in ("n", "R", "K", "trials", "errors", "error_rate", "sigma", "bound", "bound_ok", "printed_bound")}
        return d, row
    rho, lay = pf.state(sel["state"])
    sim = dict(eps=p["eps"], on_violation=p["on_violation"], **common)
    if protocol == "mc":
        r = simulate_mc(rho, pf.povm(sel["povm"]), p["n"], p["L"], p["M"], **sim)
        d = r.to_dict()
        row = {
            "n": p["n"],
            "L": p["L"],
            "M": p["M"],
            "delta_C_median": d["delta_C"]["median"],
            "delta_C_mean": d["delta_C"]["mean"],
            "max_equivalence_gap": max(t["equivalence_gap"] for t in d["trials"]),
        }
        return d, row
    if protocol == "mc-instr":
        r = simulate_mc_instr(pf.instrument(sel["instrument"]), rho, p["n"], p["L"], p["M"], **sim)
        d = r.to_dict()
        row = {
            "n": p["n"],
            "L": p["L"],
            "M": p["M"],
            "distance_median": d["distance"]["median"],
            "chain_bound_median": float(np.median([t["chain_bound"] for t in d["trials"]])),
        }
        return d, row
    if protocol == "nonfeedback":
        r = simulate_nonfeedback(rho, pf.refinement(sel["refinement"]), p["n"], p["L"], p["M"], **sim)
        d = r.to_dict()
        row = {"n": p["n"], "L": p["L"], "M": p["M"], "delta_C_median": d["delta_C"]["median"], "equivalence_gap": d["equivalence_gap"]}
        return d, row
    r = simulate_mcqsi(rho, lay, pf.povm(sel["povm"]), p["n"], p["R"], p["L"], p["M"], **sim)
    d = r.to_dict()
    row = {
        "n": p["n"],
        "R": p["R"],
        "K": d["K"],
        "L": p["L"],
        "M": p["M"],
        "delta_C": d["faithfulness"]["delta_C"],
        "decode_error_rate": d["decode_error_rate"],
        "end_to_end_distance": d["end_to_end_distance"],
    }
    return d, row


_TREND_KEY = {
    "mc": "delta_C_median",
    "mc-instr": "distance_median",
    "nonfeedback": "delta_C_median",
    "cdcqsi": "error_rate",
    "mcqsi": "decode_error_rate",
}


@cli.command("simulate")
@click.argument("input_path", metavar="INPUT")
@click.option("--protocol", type=click.Choice(PROTOCOLS), required=True)
@click.option("--n", "n", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--L", "L", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--M", "M", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--R", "R", type=float, default=1.0, show_default=True, help="Hash rate (cdcqsi, mcqsi).")
@click.option("--delta", type=float, default=0.75, show_default=True)
@click.option("--eps", type=float, default=0.1, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--on-violation", type=click.Choice(("raise", "rescale")), default="rescale", show_default=True)
@click.option("--recover/--no-recover", default=True, help="Apply the polar recovery after decoding (cdcqsi).")
@click.option("--series", default=None, help="Sweep one parameter, e.g. n=2..8 or L=1,2,4.")
@click.option("--csv", "as_csv", is_flag=True, help="Emit the series as CSV instead of JSON.")
@click.option("--state", default=None)
@click.option("--povm", default=None)
@click.option("--instrument", default=None)
@click.option("--ensemble", default=None)
@click.option("--refinement", default=None)
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads (default: CPU count).")
@click.option("--output", default=None)
@click.option("--timing", is_flag=True)
@click.pass_obj
def cmd_simulate(emit, input_path, protocol, n, L, M, R, delta, eps, trials, seed, on_violation, recover, series, as_csv,
                 state, povm, instrument, ensemble, refinement, threads, output, timing):
    """Run a protocol construction over fresh seeds."""
    pf = _problem(input_path)
    sel: dict = {}
    if protocol == "cdcqsi":
        sel["ensemble"] = _pick(pf.ensembles, ensemble, "ensembles")
    else:
        sel["state"] = _pick(pf.states, state, "states")
        if protocol in ("mc", "mcqsi"):
            sel["povm"] = _pick(pf.povms, povm, "povms")
        elif protocol == "mc-instr":
            sel["instrument"] = _pick(pf.instruments, instrument, "instruments")
        else:
            sel["refinement"] = _pick(pf.refinements, refinement, "refinements")
    base = dict(n=n, L=L, M=M, R=R, delta=delta, eps=eps, trials=trials, seed=seed,
                on_violation=on_violation, recover=recover, threads=threads or _default_threads())
    key, values = parse_series(series) if series else (None, [None])
    if as_csv and key is None:
        key, values = "n", [n]
    results, rows = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for v in values:
            p = dict(base)
            if key is not None:
                p[key] = v
            res, row = _run_protocol(protocol, pf, sel, p)
            results.append(res)
            rows.append(row)
    if as_csv:
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        _write(buf.getvalue(), output)
        return EXIT_OK
    checks: dict = {}
    if protocol == "cdcqsi":
        checks["bound_ok"] = all(r["bound_ok"] for r in results)
    if protocol in ("mc", "nonfeedback"):
        gaps = [t["equivalence_gap"] for r in results for t in r.get("trials", [])] or [r.get("equivalence_gap", 0.0) for r in results]
        checks["equivalence"] = max(gaps) <= tol.TOL_RECON
    if key is not None and len(values) > 1:
        trend = [row[_TREND_KEY[protocol]] for row in rows]
        checks[f"{_TREND_KEY[protocol]}_nonincreasing_in_{key}"] = _nonincreasing(trend)
    options = {k: v for k, v in base.items() if k != "threads" and v is not None}
    result = {"protocol": protocol, "selection": sel, "options": options}
    if key is None:
        result["run"] = results[0]
    else:
        result["series"] = {"parameter": key, "values": values, "rows": rows, "runs": results}
    rep = emit.report("simulate", seed, result, checks, {"input": _input_info(input_path)}, timing)
    _write(dumps_report(rep), output)
    return EXIT_OK


@cli.command("verify")
@click.argument("suite", type=click.Choice(SUITES))
@click.option("--instances", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--d-max", type=click.IntRange(min=2, max=6), default=6, show_default=True)
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.option("--output", default=None)
@click.option("--timing", is_flag=True)
@click.pass_obj
def cmd_verify(emit, suite, instances, seed, d_max, threads, output, timing):
    """Randomized lemma suites; exit 2 on any violation."""
    if instances == 0:
        click.echo("warning: zero instances requested, the suite passes vacuously", err=True)
    if suite == "chernoff":
        reps = bounds.chernoff_suite(seed, trials=instances) if instances else []
        bad = [r.to_dict() for r in reps if not r.satisfied]
        result = {
            "suite": suite,
            "instances": instances,
            "experiments": [r.to_dict() for r in reps],
            "violations": bad,
            "passed": not bad,
        }
    else:
        rep = bounds.run_suite(suite, instances, seed, d_max=d_max, threads=threads or _default_threads())
        result = rep.to_dict()
        bad = result["violations"]
    out = emit.report("verify", seed, result, {"zero_violations": not bad}, None, timing)
    _write(dumps_report(out), output)
    return EXIT_VERIFY if bad else EXIT_OK


def _error_doc(emit: _Emit, exc: Exception, code: int) -> None:
    info = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SizeLimit):
        info.update({"what": exc.what, "size": exc.size, "cap": exc.cap})
    if isinstance(exc, ParseError):
        info["path"] = exc.path
    doc = {"command": {"argv": emit.argv}, "version": __version__, "error": info, "exit_code": code}
    click.echo(dumps_report(doc), nl=False)
    click.echo(f"error: {info['message']}", err=True)


def main(argv=None) -> int:
    """Entry point; maps failures onto the documented exit codes."""
    args = list(sys.argv[1:] if argv is None else argv)
    emit = _Emit(args)
    try:
        rv = cli.main(args=args, prog_name="measim", standalone_mode=False, obj=emit)
    except click.exceptions.Exit as exc:
        code = exc.exit_code
    except click.UsageError as exc:
        exc.show()
        code = EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        code = EXIT_USAGE
    except SizeLimit as exc:
        _error_doc(emit, exc, EXIT_SIZE)
        code = EXIT_SIZE
    except (MeasimError, OSError, KeyError, ValueError) as exc:
        _error_doc(emit, exc, EXIT_USAGE)
        code = EXIT_USAGE
    else:
        code = rv if isinstance(rv, int) else EXIT_OK
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
