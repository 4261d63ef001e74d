"""Config-driven experiment runner.

``qspec <command> --config <path> [--out <dir>] [--threads <n>] [--seed <u64>]``

The config is a TOML file whose required top-level ``command`` must match
the CLI command.  Every run writes a ``manifest.json`` echoing the fully
resolved configuration, the declared CSV artifacts, and a ``summary.json``
with one ``{check, value, bound, pass}`` entry per declared check plus the
manifest hash.  Artifacts are written atomically (temp file + rename) and
are byte-identical across reruns with the same config and seeds.

Exit status: 0 all checks pass, 1 a numerical check failed, 2 invalid
config (with a best-effort line-anchored diagnostic).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import estimate as est
from . import verify as ver
from .copula import geometric_budget
from .exceptions import ConfigError, QspecError
from .models import CoefficientCurve, TriangularArrayModel, ceil_root
from .spectra import (
    FrequencyGrid,
    classical_tv_spectrum,
    classical_wv_spectrum,
    copula_tv_spectrum,
    discrete_wigner,
    wv_quantile_spectrum,
)

THREADS_ENV = "QSPEC_THREADS"

COMMANDS = ("spectrum", "wv", "classical", "wigner", "verify", "estimate")

# section -> {key: type-describing validator name}
_TOP_KEYS = {"command", "seed", "out_dir", "threads"}
_SECTION_KEYS = {
    "model": {"curve", "a", "a0", "slope", "knots", "innovation_sd"},
    "spectrum": {"u", "taus", "N", "H"},
    "wv": {"T", "u", "taus", "N", "H"},
    "classical": {"T", "u", "N", "H"},
    "wigner": {"signal", "omega0", "length", "values", "t", "N"},
    "verify": {
        "u", "N", "Ts", "taus", "lag_Ts", "lag_H", "lag_tau_grid",
        "summability_T", "summability_H_max", "l2_Ts",
    },
    "estimate": {"T", "u", "taus", "N", "n_rep", "window", "M", "Kmax", "mode"},
}
_COMMAND_SECTION = {
    "spectrum": "spectrum",
    "wv": "wv",
    "classical": "classical",
    "wigner": "wigner",
    "verify": "verify",
    "estimate": "estimate",
}


@dataclass(frozen=True)
class CheckResult:
    check: str
    value: float
    bound: float
    passed: bool


def _find_line(raw_text: str, token: str) -> int | None:
    for i, line in enumerate(raw_text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(f"[{token}]") or stripped.startswith(f"{token} ") or \
                stripped.startswith(f"{token}=") or stripped.startswith(f"{token}\t"):
            return i
    return None


def load_config(path: str) -> dict:
    """Parse and validate the experiment config; raises ConfigError."""
    try:
        with open(path, "rb") as fh:
            raw_bytes = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    raw_text = raw_bytes.decode("utf-8", errors="replace")
    try:
        cfg = tomllib.loads(raw_text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        if line is None:
            # tomllib embeds "(at line N, column M)" in the message
            import re

            m = re.search(r"at line (\d+)", str(e))
            line = int(m.group(1)) if m else None
        raise ConfigError(f"TOML parse error: {e}", line=line) from e

    for key, value in cfg.items():
        if isinstance(value, dict):
            if key not in _SECTION_KEYS:
                raise ConfigError(f"unknown section [{key}]", line=_find_line(raw_text, key))
            for sub in value:
                if sub not in _SECTION_KEYS[key]:
                    raise ConfigError(
                        f"unknown key {sub!r} in section [{key}]",
                        line=_find_line(raw_text, sub),
                    )
        elif key not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level key {key!r}", line=_find_line(raw_text, key))

    command = cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError(
            f"config must declare command = one of {COMMANDS}, got {command!r}",
            line=_find_line(raw_text, "command"),
        )
    if command != "wigner" and "model" not in cfg:
        raise ConfigError("missing required [model] section")
    section = _COMMAND_SECTION[command]
    if section not in cfg:
        raise ConfigError(f"missing required [{section}] section for command {command!r}",
                          line=_find_line(raw_text, "command"))
    return cfg


def _build_curve(model_cfg: dict) -> CoefficientCurve:
    kind = model_cfg.get("curve", "constant")
    try:
        if kind == "constant":
            return CoefficientCurve.constant(model_cfg.get("a", 0.0))
        if kind == "linear":
            return CoefficientCurve.linear(model_cfg.get("a0", 0.0), model_cfg.get("slope", 0.0))
        if kind == "knots":
            if "knots" not in model_cfg:
                raise ConfigError("curve = 'knots' requires a knots table")
            return CoefficientCurve.from_knots(model_cfg["knots"])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid model curve: {e}") from e
    raise ConfigError(f"unknown curve kind {kind!r} (constant | linear | knots)")


def _resolve(cfg: dict, cli_seed=None, cli_threads=None, cli_out=None) -> dict:
    """Fill in defaults; returns the manifest dict (the fully resolved config)."""
    command = cfg["command"]
    if "model" in cfg:
        model_cfg = dict(cfg["model"])
        curve = _build_curve(model_cfg)
        resolved_model = {
            "curve": curve.kind,
            "params": list(map(list, curve.params)) if curve.kind == "knots" else list(curve.params),
            "innovation_sd": float(model_cfg.get("innovation_sd", 1.0)),
            "lipschitz_const": curve.lipschitz_const,
            "sup_abs": curve.sup_abs,
        }
    else:
        curve = None
        resolved_model = None
    seed = cli_seed if cli_seed is not None else int(cfg.get("seed", 0))
    threads = cli_threads if cli_threads is not None else cfg.get(
        "threads", int(os.environ.get(THREADS_ENV, "1"))
    )
    out_dir = cli_out if cli_out is not None else cfg.get("out_dir", "qspec-out")
    section_name = _COMMAND_SECTION[command]
    section = dict(cfg[section_name])
    section.setdefault("N", 512)
    if command in ("spectrum", "wv", "classical", "verify", "estimate"):
        section.setdefault("u", 0.5)
    if command in ("spectrum", "wv", "estimate"):
        section.setdefault("taus", [[0.5, 0.5]])
    if command in ("wv", "classical"):
        section.setdefault("T", 1024)
        section.setdefault("H", ceil_root(int(section["T"]), 1, 3))
    if command == "spectrum":
        if "H" in section and section["H"] < 1:
            raise ConfigError("spectrum H must be >= 1")
        from .spectra import stationary_truncation

        section.setdefault("H", stationary_truncation(abs(curve(section["u"]))))
    if command == "verify":
        section.setdefault("Ts", [128, 512, 2048, 8192])
        section.setdefault("taus", [[0.5, 0.5], [0.25, 0.75]])
        section.setdefault("lag_Ts", [256, 1024])
        section.setdefault("lag_H", 20)
        section.setdefault("lag_tau_grid", [0.1, 0.25, 0.5, 0.75, 0.9])
        section.setdefault("summability_T", 1024)
        section.setdefault("summability_H_max", 60)
        section.setdefault("l2_Ts", [128, 512, 2048])
    if command == "estimate":
        section.setdefault("T", 2048)
        section.setdefault("n_rep", 100)
        section.setdefault("window", "bartlett")
        section.setdefault("M", ceil_root(int(section["T"]), 2, 5))
        section.setdefault("Kmax", ceil_root(int(section["T"]), 1, 3))
        section.setdefault("mode", "oracle")
    if command == "wigner":
        section.setdefault("signal", "tone")
        if section["signal"] == "tone":
            section.setdefault("omega0", math.pi / 4)
            section.setdefault("length", 257)
        section.setdefault("t", [section.get("length", 257) // 2])
        if isinstance(section["t"], int):
            section["t"] = [section["t"]]
    manifest = {
        "command": command,
        "seed": seed,
        "threads": int(threads),
        "out_dir": str(out_dir),
        section_name: section,
    }
    if resolved_model is not None:
        manifest["model"] = resolved_model
    return manifest


def _manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()


def _model_from_manifest(manifest: dict, T: int) -> TriangularArrayModel:
    m = manifest["model"]
    if m["curve"] == "constant":
        curve = CoefficientCurve.constant(*m["params"])
    elif m["curve"] == "linear":
        curve = CoefficientCurve.linear(*m["params"])
    else:
        curve = CoefficientCurve.from_knots(m["params"])
    return TriangularArrayModel(curve=curve, T=T, innovation_sd=m["innovation_sd"])


def _family_from_manifest(manifest: dict, u: float):
    # family member at u; T only anchors the array construction
    return _model_from_manifest(manifest, 64).family_at(u)


# -- command runners ----------------------------------------------------------


def _run_spectrum(manifest):
    sec = manifest["spectrum"]
    fam = _family_from_manifest(manifest, sec["u"])
    grid = FrequencyGrid.fourier(sec["N"])
    spec = copula_tv_spectrum(fam, [tuple(p) for p in sec["taus"]], grid, H=sec["H"])
    return {"spectrum.csv": spec.to_csv()}, []


def _run_wv(manifest):
    sec = manifest["wv"]
    model = _model_from_manifest(manifest, sec["T"])
    grid = FrequencyGrid.fourier(sec["N"])
    t0 = math.floor(sec["u"] * sec["T"])
    spec = wv_quantile_spectrum(model, t0, [tuple(p) for p in sec["taus"]], grid, H=sec["H"])
    return {"wv_spectrum.csv": spec.to_csv()}, []


def _run_classical(manifest):
    sec = manifest["classical"]
    model = _model_from_manifest(manifest, sec["T"])
    fam = model.family_at(sec["u"])
    grid = FrequencyGrid.fourier(sec["N"])
    f = classical_tv_spectrum(fam, grid)
    f_T = classical_wv_spectrum(model, sec["u"], grid, H=sec["H"])
    return {"classical_tv.csv": f.to_csv(), "classical_wv.csv": f_T.to_csv()}, []


def _run_wigner(manifest):
    sec = manifest["wigner"]
    grid = FrequencyGrid.fourier(sec["N"])
    if sec["signal"] == "tone":
        n = sec["length"]
        sig = np.exp(1j * sec["omega0"] * np.arange(n))
    elif sec["signal"] == "values":
        sig = np.asarray(sec["values"], dtype=complex)
    else:
        raise ConfigError(f"unknown wigner signal kind {sec['signal']!r}")
    chunks = [discrete_wigner(sig, t, grid).to_csv() for t in sec["t"]]
    header, *_ = chunks[0].splitlines(keepends=True)
    body = "".join(c.split("\n", 1)[1] for c in chunks)
    return {"wigner.csv": header + body}, []


def _run_estimate(manifest):
    sec = manifest["estimate"]
    model = _model_from_manifest(manifest, sec["T"])
    grid = FrequencyGrid.fourier(sec["N"])
    M = sec["M"]
    K = sec["Kmax"]
    if sec["window"] == "bartlett":
        window = est.bartlett_window(M, K)
    elif sec["window"] == "parzen":
        window = est.parzen_window(M, K)
    else:
        raise ConfigError(f"unknown window {sec['window']!r} (bartlett | parzen)")
    t0 = math.floor(sec["u"] * sec["T"])
    out = est.ensemble_estimate(
        model, t0, [tuple(p) for p in sec["taus"]], window, grid,
        n_rep=sec["n_rep"], seed=manifest["seed"], mode=sec["mode"],
    )
    return {"estimate.csv": out.to_csv()}, []


def _verify_tasks(manifest):
    """Independent callables for the verify command, in a fixed order."""
    sec = manifest["verify"]
    u = sec["u"]
    grid = FrequencyGrid.fourier(sec["N"])
    taus = [tuple(p) for p in sec["taus"]]
    base_model = _model_from_manifest(manifest, max(sec["Ts"]))

    def task_sup():
        report = ver.sup_convergence_sweep(base_model, sec["Ts"], u, taus, grid)
        checks = []
        for j, pair in enumerate(report.tau_pairs):
            ratios = report.sup_distances[1:, j] / report.sup_distances[:-1, j]
            checks.append(CheckResult(
                check=f"sup_convergence_monotone[tau={pair[0]:g},{pair[1]:g}]",
                value=float(ratios.max()), bound=1.0, passed=bool(ratios.max() < 1.0),
            ))
            checks.append(CheckResult(
                check=f"sup_convergence_final[tau={pair[0]:g},{pair[1]:g}]",
                value=float(report.sup_final_ratio[j]), bound=0.01,
                passed=bool(report.sup_final_ratio[j] < 0.01),
            ))
        return report, checks

    def task_lag():
        ledger = []
        checks = []
        L_hats = {}
        for T in sec["lag_Ts"]:
            model = _model_from_manifest(manifest, T)
            cert = ver.certify_local_stationarity(model)
            L_hats[T] = cert.L_hat
            checks.append(CheckResult(
                check=f"local_stationarity_L_hat[T={T}]",
                value=cert.L_hat, bound=math.inf, passed=math.isfinite(cert.L_hat),
            ))
            rows = ver.check_lag_bound(model, u, sec["lag_H"], sec["lag_tau_grid"], cert.L_hat)
            ledger.extend(rows)
            worst = max((r.lhs / r.rhs if r.rhs > 0 else math.inf) for r in rows)
            checks.append(CheckResult(
                check=f"lag_bound[T={T}]", value=float(worst), bound=1.0,
                passed=all(r.ok for r in rows),
            ))
        return (ledger, L_hats), checks

    def task_summability():
        model = _model_from_manifest(manifest, sec["summability_T"])
        H_list = list(range(0, sec["summability_H_max"] + 1))
        rep = ver.summability_check(model, u, H_list, taus)
        checks = [
            CheckResult(
                check="summability_K_stationary",
                value=float(rep.partial_stationary.max()),
                bound=rep.budget_stationary,
                passed=bool(rep.partial_stationary.max() <= rep.budget_stationary),
            ),
            CheckResult(
                check="summability_K_array",
                value=float(rep.partial_array.max()),
                bound=rep.budget_array,
                passed=bool(rep.partial_array.max() <= rep.budget_array),
            ),
            CheckResult(
                check="summability_increments_geometric",
                value=0.0 if rep.increment_certificate_ok else 1.0,
                bound=0.5,
                passed=rep.increment_certificate_ok,
            ),
        ]
        return rep, checks

    def task_l2():
        report = ver.l2_convergence_sweep(base_model, sec["l2_Ts"], u, grid)
        ratios = report.l2_distances[1:] / report.l2_distances[:-1]
        checks = [CheckResult(
            check="l2_convergence_monotone", value=float(ratios.max()), bound=1.0,
            passed=bool(report.l2_decreasing),
        )]
        return report, checks

    return [("sup", task_sup), ("lag", task_lag), ("summability", task_summability),
            ("l2", task_l2)]


def _run_verify(manifest):
    sec = manifest["verify"]
    tasks = _verify_tasks(manifest)
    threads = manifest["threads"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: t[1](), tasks))
    else:
        results = [t[1]() for t in tasks]
    (sup_report, sup_checks), ((ledger, L_hats), lag_checks), \
        (summ_report, summ_checks), (l2_report, l2_checks) = results
    merged = ver.ConvergenceReport(
        Ts=sup_report.Ts,
        u=sec["u"],
        tau_pairs=sup_report.tau_pairs,
        H_per_T=sup_report.H_per_T,
        sup_distances=sup_report.sup_distances,
        sup_reference=sup_report.sup_reference,
        sup_strictly_decreasing=sup_report.sup_strictly_decreasing,
        sup_final_ratio=sup_report.sup_final_ratio,
        l2_Ts=l2_report.l2_Ts,
        l2_distances=l2_report.l2_distances,
        l2_decreasing=l2_report.l2_decreasing,
        bound_ledger=ledger,
        K_hat=summ_report.K_hat,
        L_hat=max(L_hats.values()),
    )
    rows = ver.report_rows(merged)
    import csv as _csv
    import io as _io

    buf = _io.StringIO()
    w = _csv.writer(buf, lineterminator="\n")
    w.writerow(ver.REPORT_CSV_HEADER)
    w.writerows(rows)
    checks = sup_checks + lag_checks + summ_checks + l2_checks
    extra = {
        "monotone_sup": merged.sup_strictly_decreasing,
        "monotone_l2": merged.l2_decreasing,
        "K_hat": merged.K_hat,
        "L_hat": merged.L_hat,
    }
    return {"report.csv": buf.getvalue()}, checks, extra


_RUNNERS = {
    "spectrum": _run_spectrum,
    "wv": _run_wv,
    "classical": _run_classical,
    "wigner": _run_wigner,
    "estimate": _run_estimate,
}


def list_checks(manifest) -> list[dict]:
    """Dry-run inventory of the checks a run would perform, with bounds."""
    command = manifest["command"]
    if command != "verify":
        return []
    sec = manifest["verify"]
    sup_abs = manifest["model"]["sup_abs"]
    out = []
    for pair in sec["taus"]:
        out.append({"check": f"sup_convergence_monotone[tau={pair[0]:g},{pair[1]:g}]",
                    "bound": "consecutive ratio < 1 (strict decrease)"})
        out.append({"check": f"sup_convergence_final[tau={pair[0]:g},{pair[1]:g}]",
                    "bound": "final distance < 0.01 * sup|f|"})
    for T in sec["lag_Ts"]:
        out.append({"check": f"local_stationarity_L_hat[T={T}]", "bound": "finite"})
        out.append({"check": f"lag_bound[T={T}]",
                    "bound": f"lhs <= {ver.LAG_BOUND_SLACK} * 3 L_hat (|h|+2)/{T} for all rows"})
    out.append({"check": "summability_K_stationary",
                "bound": f"<= {geometric_budget(sup_abs, 'stationary'):.6g}"})
    out.append({"check": "summability_K_array",
                "bound": f"<= {geometric_budget(sup_abs, 'array'):.6g}"})
    out.append({"check": "summability_increments_geometric",
                "bound": "per-lag increments under the geometric certificate"})
    out.append({"check": "l2_convergence_monotone", "bound": "strictly decreasing"})
    return out


def _atomic_write(path: str, data: str):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(config_path: str, out_dir=None, threads=None, seed=None) -> int:
    """Execute the experiment; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        manifest = _resolve(cfg, cli_seed=seed, cli_threads=threads, cli_out=out_dir)
    except ConfigError as e:
        loc = f"{config_path}:{e.line}: " if e.line else f"{config_path}: "
        print(f"error: {loc}{e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as e:
        print(f"error: {config_path}: {e}", file=sys.stderr)
        return 2
    command = manifest["command"]
    extra = {}
    try:
        if command == "verify":
            artifacts, checks, extra = _run_verify(manifest)
        else:
            artifacts, checks = _RUNNERS[command](manifest)
    except ConfigError as e:
        print(f"error: {config_path}: {e}", file=sys.stderr)
        return 2
    except QspecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    out = manifest["out_dir"]
    mhash = _manifest_hash(manifest)
    for name, text in sorted(artifacts.items()):
        _atomic_write(os.path.join(out, name), text)
    _atomic_write(os.path.join(out, "manifest.json"),
                  json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    summary = {
        "manifest_hash": mhash,
        "checks": [
            {"check": c.check, "value": c.value, "bound": c.bound, "pass": c.passed}
            for c in checks
        ],
        "pass": all(c.passed for c in checks),
    }
    summary.update(extra)
    _atomic_write(os.path.join(out, "summary.json"),
                  json.dumps(summary, sort_keys=True, indent=2) + "\n")
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.check}: value={c.value:.6g} bound={c.bound:.6g}")
    if not summary["pass"]:
        print("failed checks:", file=sys.stderr)
        for c in checks:
            if not c.passed:
                print(f"  {c.check}: value={c.value:.17g} bound={c.bound:.17g}",
                      file=sys.stderr)
        return 1
    return 0


def run_list_checks(config_path: str) -> int:
    try:
        cfg = load_config(config_path)
        manifest = _resolve(cfg)
    except ConfigError as e:
        loc = f"{config_path}:{e.line}: " if e.line else f"{config_path}: "
        print(f"error: {loc}{e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as e:
        print(f"error: {config_path}: {e}", file=sys.stderr)
        return 2
    inventory = list_checks(manifest)
    for item in inventory:
        print(f"{item['check']}: {item['bound']}")
    print(f"{len(inventory)} checks")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qspec",
        description="Quantile (copula) spectral analysis experiment runner.",
    )
    parser.add_argument("command", choices=list(COMMANDS) + ["list-checks"])
    parser.add_argument("--config", required=True, help="path to the TOML experiment config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: config, then ${THREADS_ENV}, then 1)")
    parser.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
    args = parser.parse_args(argv)
    if args.command == "list-checks":
        return run_list_checks(args.config)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        loc = f"{args.config}:{e.line}: " if e.line else f"{args.config}: "
        print(f"error: {loc}{e}", file=sys.stderr)
        return 2
    if cfg["command"] != args.command:
        print(
            f"error: {args.config}: config declares command = {cfg['command']!r}, "
            f"CLI asked for {args.command!r}",
            file=sys.stderr,
        )
        return 2
    return run(args.config, out_dir=args.out, threads=args.threads, seed=args.seed)


if __name__ == "__main__":
    raise SystemExit(main())
