"""Command-line front end: ``run``, ``selftest``, ``inspect`` and ``verify``.

Exit codes: 0 success, 2 config validation failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report
from .asymptotics import (AsymptoticsError, h_curve_mc, h_curve_quadrature, mrv_asymptote, mrv_descriptor,
                          mrv_ruin_constant, safety_loading)
from .claims import ClaimModelError, model_from_descriptor
from .diagnostics import (DiagnosticError, convolution_ratio_mc, convolution_ratio_numeric, dominated_variation_test,
                          empirical_FA, kesten_check, long_tail_test, random_sum_ratio, tabulate, translation_test)
from .laws import LawError, law_from_descriptor
from .ruinsets import (BidAskError, HyperplaneFamily, LinearMapSpec, RuinSetError, check_set_properties,
                       family_from_descriptor, pullback)
from .simulator import ConfigError, asymptote_curve, config_from_descriptor, ruin_vs_asymptote, simulate_ruin_curve
from .streams import RngStream

log = logging.getLogger("mvsubexp")

SCHEMA_VERSION = 1
EXPERIMENTS = ("diagnose", "hcurve", "ruin", "compare", "geometry")
DIAGNOSE_TESTS = ("empirical", "convolution", "random_sum", "translation", "kesten",
                  "numeric_convolution", "long_tail", "dominated_variation")


class ConfigValidationError(Exception):
    def __init__(self, path, msg, line=None):
        self.path = list(path)
        self.msg = msg
        self.line = line
        super().__init__(msg)

    def render(self, filename="<config>") -> str:
        where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in self.path)
        line = f":{self.line}" if self.line else ""
        return f"{filename}{line}: {where}: {self.msg}"


def _locate(text: str, path) -> int | None:
    """Line of the last key in ``path``, found by walking the keys in order through the raw text."""
    pos = 0
    found = None
    for key in path:
        if isinstance(key, int):
            continue
        i = text.find(f'"{key}"', pos)
        if i < 0:
            break
        pos = found = i
    return None if found is None else text.count("\n", 0, found) + 1


# config parsing -----------------------------------------------------------------------------


@dataclass
class Plan:
    experiment: str
    seed: int
    section: dict
    objects: dict
    config: dict


def _get(sec, key, path, default=...):
    if key not in sec:
        if default is ...:
            raise ConfigValidationError(path + [key], "required field is missing")
        return default
    return sec[key]


def _levels(sec, path, key="levels"):
    raw = _get(sec, key, path)
    try:
        lv = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigValidationError(path + [key], "levels must be a list of numbers") from None
    if lv.ndim != 1 or lv.size == 0 or np.any(lv <= 0) or np.any(np.diff(lv) <= 0):
        raise ConfigValidationError(path + [key], "levels must be positive and strictly increasing")
    return lv


def _posint(sec, key, path, default=...):
    v = _get(sec, key, path, default)
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigValidationError(path + [key], "must be a positive integer")
    return v


def _build(fn, desc, path):
    try:
        return fn(desc)
    except BidAskError as exc:
        raise ConfigValidationError(path + ["pi"], f"bid-ask {exc}") from None
    except (RuinSetError, ClaimModelError, LawError, ConfigError, DiagnosticError) as exc:
        raise ConfigValidationError(path, str(exc)) from None
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigValidationError(path, f"invalid descriptor ({type(exc).__name__}: {exc})") from None


def parse_config(cfg: dict) -> Plan:
    if not isinstance(cfg, dict):
        raise ConfigValidationError([], "config must be a JSON object")
    version = _get(cfg, "schema_version", [])
    if version != SCHEMA_VERSION:
        raise ConfigValidationError(["schema_version"], f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    seed = _get(cfg, "seed", [])
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigValidationError(["seed"], "seed must be a nonnegative integer")
    present = [e for e in EXPERIMENTS if e in cfg]
    if len(present) != 1:
        raise ConfigValidationError([], f"exactly one experiment section of {list(EXPERIMENTS)} is required, found {present}")
    exp = present[0]
    sec = cfg[exp]
    path = [exp]
    if not isinstance(sec, dict):
        raise ConfigValidationError(path, "section must be an object")
    objects = globals()[f"_parse_{exp}"](sec, path)
    return Plan(exp, seed, sec, objects, cfg)


def _parse_risk(sec, path):
    for key in ("claims", "ruin_set", "premium"):
        _get(sec, key, path)
    _build(model_from_descriptor, sec["claims"], path + ["claims"])
    _build(family_from_descriptor, sec["ruin_set"], path + ["ruin_set"])
    if "interarrival" in sec:
        _build(law_from_descriptor, sec["interarrival"], path + ["interarrival"])
    risk = _build(config_from_descriptor, sec, path)
    return {"risk": risk, "levels": _levels(sec, path), "n_paths": _posint(sec, "n_paths", path)}


def _parse_ruin(sec, path):
    return _parse_risk(sec, path)


def _parse_compare(sec, path):
    out = _parse_risk(sec, path)
    out["n_mc"] = _posint(sec, "n_mc", path, 10**6)
    return out


def _parse_geometry(sec, path):
    fam = _build(family_from_descriptor, _get(sec, "ruin_set", path), path + ["ruin_set"])
    if "linear_map" in sec:
        linmap = _build(LinearMapSpec, sec["linear_map"], path + ["linear_map"])
        if not isinstance(fam, HyperplaneFamily):
            raise ConfigValidationError(path + ["linear_map"], "pullback needs a hyperplane family")
        fam = _build(lambda m: pullback(fam, m), linmap, path + ["linear_map"])
    pts = np.asarray(_get(sec, "points", path, []), dtype=float).reshape(-1, fam.dim) if sec.get("points") else np.zeros((0, fam.dim))
    return {"family": fam, "points": pts, "levels": _levels(sec, path) if "levels" in sec else np.array([1.0]),
            "checks": _posint(sec, "checks", path, 1000)}


def _parse_hcurve(sec, path):
    model = _build(model_from_descriptor, _get(sec, "claims", path), path + ["claims"])
    fam = _build(family_from_descriptor, _get(sec, "ruin_set", path), path + ["ruin_set"])
    if not isinstance(fam, HyperplaneFamily):
        raise ConfigValidationError(path + ["ruin_set"], "H curves need a hyperplane family")
    if "c" in sec:
        c = np.atleast_1d(np.asarray(sec["c"], dtype=float))
        if c.shape != (model.dim,) or np.any(c <= 0):
            raise ConfigValidationError(path + ["c"], f"c must be a positive vector of length {model.dim}")
    elif "premium" in sec:
        inter = _build(law_from_descriptor, sec.get("interarrival", {"law": "exponential", "rate": 1.0}),
                       path + ["interarrival"])
        c = (np.atleast_1d(np.asarray(sec["premium"], dtype=float)), inter)
    else:
        raise ConfigValidationError(path + ["c"], "give either c or premium (with interarrival)")
    method = _get(sec, "method", path, "quadrature")
    if method not in ("quadrature", "mc", "both"):
        raise ConfigValidationError(path + ["method"], "method must be quadrature, mc or both")
    return {"model": model, "family": fam, "c": c, "levels": _levels(sec, path), "method": method,
            "n": _posint(sec, "n", path, 10**6), "mrv": bool(sec.get("mrv", False))}


def _parse_diagnose(sec, path):
    test = _get(sec, "test", path)
    if test not in DIAGNOSE_TESTS:
        raise ConfigValidationError(path + ["test"], f"unknown test {test!r}; choose from {list(DIAGNOSE_TESTS)}")
    out = {"test": test}
    if test in ("numeric_convolution", "long_tail", "dominated_variation"):
        out["law"] = _build(law_from_descriptor, _get(sec, "law", path), path + ["law"])
        if test == "numeric_convolution":
            t_max = float(_get(sec, "t_max", path))
            if not t_max > 0:
                raise ConfigValidationError(path + ["t_max"], "t_max must be positive")
            out.update(t_max=t_max, size=_posint(sec, "size", path, 4000),
                       at=_levels(sec, path, "at") if "at" in sec else None,
                       target=float(sec.get("target", 2.0)))
        else:
            out["levels"] = _levels(sec, path)
            out["y"] = float(sec.get("y", 1.0))
        return out
    out["model"] = _build(model_from_descriptor, _get(sec, "claims", path), path + ["claims"])
    out["family"] = _build(family_from_descriptor, _get(sec, "ruin_set", path), path + ["ruin_set"])
    out["levels"] = _levels(sec, path)
    out["n"] = _posint(sec, "n", path)
    if test in ("convolution",):
        out["m"] = _posint(sec, "m", path, 2)
    if test == "random_sum":
        p = float(_get(sec, "p", path))
        if not 0 < p <= 1:
            raise ConfigValidationError(path + ["p"], "p must lie in (0, 1]")
        out["p"] = p
    if test == "translation":
        a = np.asarray(_get(sec, "shift", path), dtype=float)
        if a.shape != (out["model"].dim,):
            raise ConfigValidationError(path + ["shift"], f"shift must have length {out['model'].dim}")
        out["shift"] = a
    if test == "kesten":
        out["epsilon"] = float(_get(sec, "epsilon", path))
        out["m_max"] = _posint(sec, "m_max", path, 4)
    return out


def load_config(path):
    """Read and validate a JSON config; raise :class:`ConfigValidationError` with a line number."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError([], f"malformed JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    try:
        return parse_config(cfg)
    except ConfigValidationError as exc:
        exc.line = exc.line or _locate(text, exc.path)
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError([], f"malformed value ({exc})") from None


# experiment runners -----------------------------------------------------------------------------


def _run_ruin(plan, out, stream, threads):
    o = plan.objects
    est = simulate_ruin_curve(o["risk"], o["levels"], o["n_paths"], stream, threads)
    try:
        H = asymptote_curve(o["risk"], o["levels"])[0]
    except AsymptoticsError:
        H = [None] * len(est)  # no quadrature route; use the compare experiment for an MC asymptote
    header = ["u", "psi_hat", "ci_lo", "ci_hi", "H", "ratio", "truncated_frac", "mean_steps", "ruin_count", "n_paths",
              "give_up", "give_up_shift"]
    rows = [[e.u, e.estimate, e.ci[0], e.ci[1], h, None if h is None else e.estimate / h, e.truncated_frac,
             e.mean_steps, e.ruin_count, e.n_paths, e.give_up, e.give_up_shift] for e, h in zip(est, H)]
    files = [report.write_csv(out / "ruin.csv", header, rows)]
    summary = {"c": o["risk"].c, "give_up": est[0].give_up,
               "give_up_stable": [e.give_up_stable for e in est]}
    return files, summary


def _run_compare(plan, out, stream, threads):
    o = plan.objects
    cmp = ruin_vs_asymptote(o["risk"], o["levels"], o["n_paths"], stream, threads, o["n_mc"])
    header = ["u", "psi_hat", "psi_lo", "psi_hi", "H", "ratio", "ratio_lo", "ratio_hi", "mrv", "truncated_frac",
              "mean_steps"]
    rows = [[r.u, r.psi, r.psi_lo, r.psi_hi, r.H, r.ratio, r.ratio_lo, r.ratio_hi, r.mrv, r.truncated_frac,
             r.mean_steps] for r in cmp.rows]
    files = [report.write_csv(out / "compare.csv", header, rows)]
    verdict = {"trend_steps": cmp.trend_steps, "trend_toward_one": cmp.trend_toward_one, "h_method": cmp.h_method,
               "give_up": cmp.give_up, "top_ratio": cmp.rows[-1].ratio, "notes": cmp.notes, "c": o["risk"].c}
    files.append(report.write_json(out / "verdict.json", verdict))
    u = [r.u for r in cmp.rows]
    svg = report.svg_line_plot(
        [{"name": "psi_hat", "x": u, "y": [r.psi for r in cmp.rows], "lo": [r.psi_lo for r in cmp.rows],
          "hi": [r.psi_hi for r in cmp.rows]},
         {"name": "H", "x": u, "y": [r.H for r in cmp.rows]}],
        title="ruin probability vs asymptote", ylabel="probability")
    (out / "compare.svg").write_bytes(svg.encode())
    files.append(out / "compare.svg")
    return files, verdict


def _run_geometry(plan, out, stream, threads):
    o = plan.objects
    fam = o["family"]
    info = {"dim": fam.dim, "problems": check_set_properties(fam, stream.generator(), o["checks"])}
    if isinstance(fam, HyperplaneFamily):
        info["directions"] = fam.directions
    rows = []
    for i, x in enumerate(o["points"]):
        y = float(fam.scale_index(x))
        for u in o["levels"]:
            rows.append([i, *x, u, y, bool(fam.membership(x, u))])
    header = ["point"] + [f"x{j}" for j in range(fam.dim)] + ["u", "scale_index", "member"]
    files = [report.write_csv(out / "geometry.csv", header, rows), report.write_json(out / "geometry.json", info)]
    return files, {"problems": info["problems"]}


def _run_hcurve(plan, out, stream, threads):
    o = plan.objects
    c = o["c"]
    if isinstance(c, tuple):
        c = safety_loading(o["model"], c[0], c[1].mean, stream.spawn(2)).vector
    curves = []
    if o["method"] in ("quadrature", "both"):
        curves.append(h_curve_quadrature(o["model"], o["family"], c, o["levels"]))
    if o["method"] in ("mc", "both"):
        curves.append(h_curve_mc(o["model"], o["family"], c, o["levels"], o["n"], stream.spawn(0), threads))
    summary = {"c": c}
    mrv_vals = None
    if o["mrv"]:
        try:
            desc = mrv_descriptor(o["model"])
            const = mrv_ruin_constant(desc, o["family"], c, stream=stream.spawn(1))
            mrv_vals = mrv_asymptote(desc, o["family"], c, o["levels"], const).values
            summary["mrv"] = {"alpha": desc.alpha, "constant": const.value, "stderr": const.stderr,
                              "quadrature_error": const.extra.get("quadrature_error")}
        except AsymptoticsError as exc:
            summary["mrv_error"] = str(exc)
    rows = []
    for cur in curves:
        for k, r in enumerate(cur.rows()):
            rows.append([r["level"], r["estimate"], r["stderr"], r["method"], cur.flags[k],
                         None if mrv_vals is None else mrv_vals[k]])
    files = [report.write_csv(out / "hcurve.csv", ["u", "H", "stderr", "method", "flag", "mrv"], rows),
             report.write_json(out / "hcurve.json", summary)]
    return files, summary


def _run_diagnose(plan, out, stream, threads):
    o = plan.objects
    test = o["test"]
    if test == "empirical":
        cur = empirical_FA(o["model"], o["family"], o["levels"], o["n"], stream, threads)
        header = ["level", "estimate", "stderr", "method", "n", "hits", "flag"]
        rows = [dict(r, hits=h, flag=f) for r, h, f in zip(cur.rows(), cur.aux["hits"], cur.flags)]
        files = [report.write_csv(out / "diagnose.csv", header, rows)]
        return files, {"test": test}
    if test == "kesten":
        rep = kesten_check(o["model"], o["family"], o["epsilon"], o["m_max"], o["levels"], o["n"], stream, threads)
        rows = [[m, p.u, p.ratio, p.lo, p.hi] for m, pts in rep.ratios.items() for p in pts]
        files = [report.write_csv(out / "diagnose.csv", ["m", "u", "ratio", "lo", "hi"], rows)]
        verdict = rep.to_json()
    else:
        if test == "convolution":
            res = convolution_ratio_mc(o["model"], o["family"], o["m"], o["levels"], o["n"], stream, threads)
        elif test == "random_sum":
            res = random_sum_ratio(o["model"], o["family"], o["p"], o["levels"], o["n"], stream, threads)
        elif test == "translation":
            res = translation_test(o["model"], o["family"], o["shift"], o["levels"], o["n"], stream, threads)
        elif test == "numeric_convolution":
            t, sf = tabulate(o["law"], 0.0, o["t_max"], o["size"])
            res = convolution_ratio_numeric(t, sf, o["at"], o["target"])
        elif test == "long_tail":
            res = long_tail_test(o["law"], o["y"], o["levels"])
        else:
            res = dominated_variation_test(o["law"], o["levels"])
        rows = [[p.u, p.ratio, p.lo, p.hi] for p in res.points]
        files = [report.write_csv(out / "diagnose.csv", ["u", "ratio", "lo", "hi"], rows)]
        verdict = dict(res.to_json(), extra={k: v for k, v in res.extra.items() if not isinstance(v, np.ndarray)})
    verdict["test"] = test
    files.append(report.write_json(out / "verdict.json", verdict))
    return files, {"test": test, "verdict": verdict.get("verdict")}


RUNNERS = {"ruin": _run_ruin, "compare": _run_compare, "geometry": _run_geometry, "hcurve": _run_hcurve,
           "diagnose": _run_diagnose}


def describe_plan(plan: Plan) -> dict:
    """Resolved plan for ``--dry-run``: descriptors and derived constants, no sampling."""
    info = {"experiment": plan.experiment, "seed": plan.seed, "config_hash": report.config_hash(plan.config)}
    for key, obj in plan.objects.items():
        if key == "risk":
            info["claims"] = obj.model.to_descriptor()
            info["directions"] = obj.family.directions
            info["c"] = obj.c
            levels = plan.objects["levels"]
            info["give_up"] = obj.give_up_level(float(np.max(levels)))
        elif key == "family":
            info["directions"] = obj.directions if isinstance(obj, HyperplaneFamily) else "LP-backed solvency set"
        elif key in ("model", "law"):
            info[key] = obj.to_descriptor()
        elif isinstance(obj, (np.ndarray, int, float, str, bool, list)):
            info[key] = obj
    return info


def run(config_path, out_dir=None, threads=None, dry_run=False) -> int:
    try:
        plan = load_config(config_path)
    except ConfigValidationError as exc:
        print(f"config error: {exc.render(str(config_path))}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: cannot read {config_path}: {exc}", file=sys.stderr)
        return 2
    if dry_run:
        sys.stdout.write(report.canonical_json(describe_plan(plan)))
        return 0
    out = Path(out_dir or plan.config.get("output") or Path("mvsubexp-out") / Path(config_path).stem)
    try:
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        stream = RngStream(plan.seed)
        files, summary = RUNNERS[plan.experiment](plan, out, stream, threads)
        report.write_report(out, plan.config, plan.experiment, files, summary)
        (out / "timing.log").write_text(f"wall_seconds {time.perf_counter() - t0:.3f}\n")
    except Exception as exc:  # runtime failures map to exit code 3
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {out}")
    return 0


def inspect(descriptor_path, n_points: int = 5, seed: int = 0) -> int:
    try:
        desc = json.loads(Path(descriptor_path).read_text())
        fam = _build(family_from_descriptor, desc, [])
    except json.JSONDecodeError as exc:
        print(f"config error: {descriptor_path}:{exc.lineno}: malformed JSON: {exc.msg}", file=sys.stderr)
        return 2
    except ConfigValidationError as exc:
        text = Path(descriptor_path).read_text()
        exc.line = _locate(text, exc.path)
        print(f"config error: {exc.render(str(descriptor_path))}", file=sys.stderr)
        return 2
    print(f"dimension: {fam.dim}")
    if isinstance(fam, HyperplaneFamily):
        print(f"supporting directions ({len(fam)}):")
        for p in fam.directions:
            print("  " + " ".join(f"{v:.12g}" for v in p))
    else:
        print("supporting directions: LP-backed solvency set (d > 3)")
    rng = RngStream(seed).generator()
    pts = rng.exponential(1.0, size=(n_points, fam.dim))
    print("sample memberships at u = 1:")
    for x in pts:
        y = float(fam.scale_index(x))
        print(f"  x = [{', '.join(f'{v:.4f}' for v in x)}]  Y = {y:.6f}  in A: {bool(fam.membership(x, 1.0))}")
    return 0


def verify(path) -> int:
    try:
        rep = report.load_report(path)
    except report.ReportMismatch as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return 3
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return 3
    print(f"ok: {len(rep['files'])} artifact(s), config hash {rep['config_hash'][:12]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvsubexp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
    r.add_argument("--dry-run", action="store_true", help="print the resolved plan without sampling")
    s = sub.add_parser("selftest", help="fast acceptance subset")
    s.add_argument("--seed", type=int, default=20240601)
    s.add_argument("--ruin-set", help="also check this ruin-set descriptor")
    i = sub.add_parser("inspect", help="print the supporting directions of a ruin-set descriptor")
    i.add_argument("descriptor")
    i.add_argument("--points", type=int, default=5)
    v = sub.add_parser("verify", help="re-open a report and check its hashes")
    v.add_argument("report")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        return run(args.config, args.out, args.threads, args.dry_run)
    if args.command == "inspect":
        return inspect(args.descriptor, args.points)
    if args.command == "verify":
        return verify(args.report)
    from .selftest import selftest

    return selftest(args.seed, args.ruin_set)


if __name__ == "__main__":
    sys.exit(main())
