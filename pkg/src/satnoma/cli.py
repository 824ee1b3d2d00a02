"""Command-line driver: load a scenario, sweep the SNR, write CSV.

Scenario files are flat ``key = value`` text (INI syntax, one optional
``[scenario]`` header). Keys:

    label           free-form name (optional)
    fading          preset name fhs | as | ils, or give b, m, omega instead
    alloc           power fractions a_1..a_M, comma separated
    rates_bpcu      target rates R_1..R_M
    angle_deg       off-boresight angle per user (one value applies to all)
    carrier_hz, distance_m, angle3db_deg, sat_gain_dbi, user_gain_dbi
                    link geometry (scalars or one value per user)
    sic             psic | ipsic
    omega_i_db      residual interference power 10 log10(omega_i), ipsic only
    exempt_first_user  true | false (ipsic only; default false)
    gain_reference  boresight | absolute (default boresight)
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import re
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import analytic, montecarlo
from .analytic import ApproximationRegimeWarning, OutageResult
from .channel import ShadowedRicianParams, derive, preset
from .errors import ConvergenceError, ValidationError
from .linkbudget import LinkGeometry
from .montecarlo import SimConfig
from .noma import NomaScenario, SicMode, UserConfig
from .specfun import DEFAULT_CONTROL

log = logging.getLogger("satnoma")

CSV_COLUMNS = ("snr_db", "user", "mode", "probability", "mc_ci_halfwidth",
               "series_terms", "quad_nodes", "seed")
MODES = ("exact", "asymptote", "floor", "series", "mc", "oma")
DEFAULT_MODES = ("exact", "asymptote", "floor", "mc", "oma")
RECIPES = ("fig1", "fig2", "fig3")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

_KNOWN_KEYS = {
    "label", "fading", "b", "m", "omega", "alloc", "rates_bpcu", "angle_deg",
    "carrier_hz", "distance_m", "angle3db_deg", "sat_gain_dbi", "user_gain_dbi",
    "sic", "omega_i_db", "exempt_first_user", "gain_reference",
}
_GEOMETRY_KEYS = ("carrier_hz", "distance_m", "angle_deg", "angle3db_deg",
                  "sat_gain_dbi", "user_gain_dbi")


@dataclass(frozen=True)
class LoadedScenario:
    label: str
    scenario: NomaScenario


@dataclass(frozen=True)
class SweepSpec:
    snr_db_start: float
    snr_db_stop: float
    snr_db_step: float
    modes: tuple[str, ...] = DEFAULT_MODES
    users: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.snr_db_start <= self.snr_db_stop:
            raise ValidationError("SNR sweep needs start <= stop")
        if not self.snr_db_step > 0:
            raise ValidationError("SNR sweep step must be positive")
        bad = set(self.modes) - set(MODES)
        if bad:
            raise ValidationError(f"unknown modes {sorted(bad)}; choose from {MODES}")

    def grid(self) -> list[float]:
        n = int(math.floor((self.snr_db_stop - self.snr_db_start) / self.snr_db_step + 1e-9)) + 1
        return [round(self.snr_db_start + i * self.snr_db_step, 10) for i in range(n)]


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return i
    return None


def parse_scenario_text(text: str, source: str = "<string>") -> LoadedScenario:
    """Parse scenario text; every error names the source and line."""
    offset = 0
    if not re.search(r"^\s*\[", text, re.MULTILINE):
        text_ini = "[scenario]\n" + text
        offset = 1
    else:
        text_ini = text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text_ini, source=source)
    except configparser.Error as exc:
        # Report line numbers of the file as written, not of the patched text.
        msg = re.sub(r"\[line\s+(\d+)\]", lambda m: f"[line {int(m.group(1)) - offset}]", str(exc))
        raise ValidationError(f"{source}: cannot parse scenario: {msg}") from None
    sections = cp.sections()
    if sections != ["scenario"]:
        raise ValidationError(f"{source}: expected a single [scenario] section, found {sections}")
    raw = dict(cp["scenario"])

    def where(key):
        line = _line_of(text, key)
        return f"{source}, line {line}" if line else source

    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ValidationError(f"{where(key)}: unknown key {key!r}")

    def floats(key):
        try:
            return [float(v) for v in raw[key].split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"{where(key)}: {key} must be numbers, got {raw[key]!r}") from None

    def need(key):
        if key not in raw:
            raise ValidationError(f"{source}: missing required key {key!r}")
        return raw[key]

    try:
        need("alloc")
        alloc = floats("alloc")
        need("rates_bpcu")
        rates = floats("rates_bpcu")
        M = len(alloc)
        if len(rates) != M:
            raise ValidationError(f"{where('rates_bpcu')}: {len(rates)} rates for {M} users")

        if "fading" in raw:
            fading = preset(raw["fading"])
        else:
            for key in ("b", "m", "omega"):
                need(key)
            fading = ShadowedRicianParams(floats("b")[0], floats("m")[0], floats("omega")[0])

        per_user: dict[str, list[float]] = {}
        for key in _GEOMETRY_KEYS:
            if key in raw:
                vals = floats(key)
                if len(vals) == 1:
                    vals = vals * M
                if len(vals) != M:
                    raise ValidationError(f"{where(key)}: {key} needs 1 or {M} values, got {len(vals)}")
                per_user[key] = vals
        geoms = [LinkGeometry(**{k: v[i] for k, v in per_user.items()}) for i in range(M)]
        users = [UserConfig(alloc=a, rate_bpcu=r, geometry=g, fading=fading)
                 for a, r, g in zip(alloc, rates, geoms)]

        kind = raw.get("sic", "psic").strip().lower()
        try:
            exempt = cp["scenario"].getboolean("exempt_first_user", fallback=False)
        except ValueError:
            raise ValidationError(f"{where('exempt_first_user')}: expected true or false") from None
        if kind == "ipsic":
            need("omega_i_db")
            sic = SicMode.ipsic_db(floats("omega_i_db")[0], exempt)
        elif kind == "psic":
            if "omega_i_db" in raw:
                raise ValidationError(f"{where('omega_i_db')}: omega_i_db given but sic = psic")
            sic = SicMode.psic()
        else:
            raise ValidationError(f"{where('sic')}: sic must be psic or ipsic, got {kind!r}")

        scenario = NomaScenario(tuple(users), sic, raw.get("gain_reference", "boresight").strip())
    except ValidationError as exc:
        msg = str(exc)
        if not msg.startswith(source):
            msg = f"{source}: {msg}"
        raise ValidationError(msg) from None
    return LoadedScenario(raw.get("label", Path(source).stem), scenario)


def load_scenario(path: str | Path) -> LoadedScenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from None
    return parse_scenario_text(text, str(path))


def recipe_files(name: str) -> list[tuple[str, str]]:
    """``(variant, text)`` pairs of a built-in figure recipe, in stable order."""
    if name not in RECIPES:
        raise ValidationError(f"unknown preset {name!r}; choose from {RECIPES}")
    root = resources.files("satnoma") / "recipes"
    out = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        stem = entry.name.rsplit(".", 1)[0]
        if entry.name.endswith(".ini") and (stem == name or stem.startswith(name + "_")):
            out.append((stem[len(name) + 1:] if stem != name else "", entry.read_text()))
    return out


def _row(snr_db, user, mode, result: OutageResult, seed=None):
    d = result.diagnostics
    return {
        "snr_db": f"{snr_db:g}",
        "user": str(user),
        "mode": mode,
        "probability": f"{result.probability:.15e}",
        "mc_ci_halfwidth": "" if result.ci_halfwidth is None else f"{result.ci_halfwidth:.15e}",
        "series_terms": "" if d.series_terms is None else str(d.series_terms),
        "quad_nodes": "" if d.quad_nodes is None else str(d.quad_nodes),
        "seed": "" if seed is None else str(seed),
    }


def _point_jobs(scenario: NomaScenario, sweep: SweepSpec, sim: SimConfig, quad_n: int):
    """One closure per CSV row; each returns the row dict."""
    ipsic = scenario.sic.is_imperfect
    psic = scenario.with_sic(SicMode.psic()) if ipsic else scenario
    users = range(1, scenario.M + 1) if sweep.users is None else sweep.users
    point_sim = SimConfig(sim.trials, sim.seed, 1)
    ctl = DEFAULT_CONTROL
    jobs = []
    for snr_db in sweep.grid():
        rho = 10.0 ** (snr_db / 10.0)
        for p in users:
            def add(mode, fn, seed=None, snr_db=snr_db):
                jobs.append((snr_db, p, mode, fn, seed))
            if "exact" in sweep.modes:
                add("exact_psic", lambda p=p, rho=rho: analytic.outage_psic_exact(psic, p, rho, ctl))
                if ipsic:
                    add("exact_ipsic", lambda p=p, rho=rho: analytic.outage_ipsic_exact(scenario, p, rho, quad_n, ctl))
            if "asymptote" in sweep.modes:
                add("asymptote_psic", lambda p=p, rho=rho: analytic.outage_psic_asymptote(psic, p, rho))
            if "series" in sweep.modes:
                add("series_psic", lambda p=p, rho=rho: analytic.outage_psic_series_approx(psic, p, rho, ctl))
            if "floor" in sweep.modes and ipsic:
                add("floor_ipsic", lambda p=p: analytic.outage_ipsic_floor(scenario, p, quad_n, ctl))
            if "oma" in sweep.modes:
                add("oma", lambda p=p, rho=rho: analytic.outage_oma(psic, p, rho, ctl))
            if "mc" in sweep.modes:
                add("mc_psic", lambda p=p, rho=rho: montecarlo.simulate_outage(psic, p, rho, point_sim), sim.seed)
                if ipsic:
                    add("mc_ipsic", lambda p=p, rho=rho: montecarlo.simulate_outage(scenario, p, rho, point_sim), sim.seed)
                if "oma" in sweep.modes:
                    add("mc_oma", lambda p=p, rho=rho: montecarlo.simulate_oma(psic, p, rho, point_sim), sim.seed)
    return jobs


def sweep_rows(scenario: NomaScenario, sweep: SweepSpec, sim: SimConfig,
               quad_n: int = analytic.DEFAULT_QUAD_N) -> list[dict[str, str]]:
    """Evaluate every sweep point; rows come back sorted by (snr_db, user, mode)."""
    for p in sweep.users or ():
        if not 1 <= p <= scenario.M:
            raise ValidationError(f"user {p} outside 1..{scenario.M}")
    jobs = _point_jobs(scenario, sweep, sim, quad_n)

    def run(job):
        snr_db, p, mode, fn, seed = job
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ApproximationRegimeWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            result = fn()
        if "quadrature_nonconvergence" in result.diagnostics.flags:
            raise ConvergenceError(f"quadrature did not converge at {snr_db} dB, user {p}, {mode}")
        return (snr_db, p, mode), _row(snr_db, p, mode, result, seed)

    if sim.workers > 1:
        with ThreadPoolExecutor(max_workers=sim.workers) as pool:
            keyed = list(pool.map(run, jobs))
    else:
        keyed = [run(j) for j in jobs]
    keyed.sort(key=lambda kv: kv[0])
    return [row for _, row in keyed]


def write_csv(rows: Sequence[dict[str, str]], out) -> None:
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def run_sweep(scenario_file, sweep: SweepSpec, sim: SimConfig, out_path,
              quad_n: int = analytic.DEFAULT_QUAD_N) -> Path:
    loaded = load_scenario(scenario_file)
    rows = sweep_rows(loaded.scenario, sweep, sim, quad_n)
    out_path = Path(out_path)
    with open(out_path, "w", newline="") as fh:
        write_csv(rows, fh)
    return out_path


def validate_report(loaded: LoadedScenario) -> str:
    s = loaded.scenario
    buf = io.StringIO()
    w = buf.write
    w(f"scenario: {loaded.label}\n")
    w(f"users: {s.M}   sic: {s.sic.kind}")
    if s.sic.is_imperfect:
        w(f" (omega_i = {s.sic.omega_i:.6g}, {10 * math.log10(s.sic.omega_i):.6g} dB"
          f"{', user 1 exempt' if s.sic.exempt_first_user else ''})")
    w(f"   gain reference: {s.gain_reference} (scale {s.gain_scale:.6e})\n")
    w("user  alloc   rate   gamma_th      margin        alpha         beta          delta"
      "         phi_abs       phi\n")
    for p in range(1, s.M + 1):
        d = derive(s.fading(p))
        i = p - 1
        w(f"{p:<5d} {s.allocs[i]:<7.4g} {s.rates[i]:<6.4g} {s.thresholds[i]:<13.7g} "
          f"{s.feasibility_margins[i]:<13.7g} {d.alpha:<13.7g} {d.beta:<13.7g} {d.delta:<13.7g} "
          f"{s.absolute_gains[i]:<13.7e} {s.gains[i]:.7g}\n")
    w("feasibility: ok (margin = a_p - gamma_th_p * sum_{i>p} a_i; last row is a_M)\n")
    return buf.getvalue()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _snr_range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected START:STOP:STEP")
    try:
        return tuple(float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR range {text!r}") from None


def _csv_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _int_list(text):
    try:
        return tuple(int(x) for x in _csv_list(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad user list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="satnoma", description="Outage sweeps for NOMA satellite downlinks "
                 "over shadowed-Rician fading.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario file")
    src.add_argument("--preset", choices=RECIPES, help="built-in figure recipe")
    ap.add_argument("--snr-db", type=_snr_range, default=(0.0, 40.0, 5.0), metavar="START:STOP:STEP")
    ap.add_argument("--modes", type=_csv_list, default=DEFAULT_MODES,
                    help=f"comma list from {','.join(MODES)}")
    ap.add_argument("--users", type=_int_list, default=None,
                    help="comma list of user indices (default all; empty for none)")
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--quad-n", type=int, default=analytic.DEFAULT_QUAD_N)
    ap.add_argument("--omega-i-db", type=float, default=None,
                    help="override residual interference power (switches the scenario to ipSIC)")
    ap.add_argument("--out", type=Path, help="CSV output path (multi-variant recipes add _VARIANT)")
    ap.add_argument("--validate-only", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _variant_path(out: Path, variant: str, n_variants: int) -> Path:
    if n_variants == 1 or not variant:
        return out
    return out.with_name(f"{out.stem}_{variant}{out.suffix}")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.scenario is not None:
            variants = [("", load_scenario(args.scenario))]
        else:
            variants = [(v, parse_scenario_text(text, f"{args.preset}:{v or args.preset}"))
                        for v, text in recipe_files(args.preset)]
        if args.omega_i_db is not None:
            variants = [(v, LoadedScenario(ls.label, ls.scenario.with_sic(SicMode.ipsic_db(
                args.omega_i_db, ls.scenario.sic.exempt_first_user)))) for v, ls in variants]

        if args.validate_only:
            for _, ls in variants:
                print(validate_report(ls))
            return EXIT_OK

        if args.out is None:
            raise ValidationError("--out is required unless --validate-only is given")
        if not 1 <= args.quad_n <= 128:
            raise ValidationError(f"--quad-n must lie in [1, 128], got {args.quad_n}")
        start, stop, step = args.snr_db
        sweep = SweepSpec(start, stop, step, tuple(args.modes), args.users)
        sim = SimConfig(args.trials, args.seed, args.workers)
        for variant, ls in variants:
            rows = sweep_rows(ls.scenario, sweep, sim, args.quad_n)
            path = _variant_path(args.out, variant, len(variants))
            with open(path, "w", newline="") as fh:
                write_csv(rows, fh)
            log.info("%s: %d rows -> %s (seed %d, workers %d)", ls.label, len(rows), path,
                     sim.seed, sim.workers)
    except ValidationError as exc:
        print(f"satnoma: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"satnoma: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
