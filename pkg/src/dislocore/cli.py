"""Command-line entry point: ``dislocore <mode> --scenario <path> [--out dir] [--quiet]``.

Exit codes: 0 when the run passes its declared check, 2 on a bound or check
violation, 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import MODES, Scenario, build_domain
from .dirichlet import (
    BoundaryDatum,
    finite_eps_energy,
    limit_functional,
    limit_functional_n,
    renormalize,
)
from .dynamics import (
    SimulationOptions,
    default_collision_radius,
    pair_bound,
    simulate,
    verify_boundary_bound,
    verify_pair_bound,
)
from .energy import Configuration, core_energy, renormalized_energy
from .errors import ConfigError, DislocoreError
from .green import GreenEngine
from .minimize import MinimizeOptions, confinement_sweep, minimize_finite_eps, minimize_limit

log = logging.getLogger("dislocore")

EXIT_PASS, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def worker_count(scenario):
    env = os.environ.get("DISLOCORE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("DISLOCORE_THREADS", f"not an integer: {env!r}") from None
    if scenario.workers is not None:
        return scenario.workers
    return os.cpu_count() or 1


def _engine(scenario, domain):
    return GreenEngine(domain, scenario.green["backend"], scenario.green["panels"])


def _sim_options(scenario, T_max, collision_radius=None):
    tol = scenario.tolerances
    p = scenario.params
    if p.get("collision_radius") is not None:
        collision_radius = p["collision_radius"]
    return SimulationOptions(
        rel_tol=tol["rel_tol"],
        abs_tol=tol["abs_tol"],
        event_rel_tol=tol["event_rel_tol"],
        T_max=T_max,
        collision_radius=collision_radius,
        continue_after_collision=bool(p.get("continue_after_collision", False)),
    )


def _spectators(p):
    spec = p.get("spectators")
    if spec is None:
        return None
    return np.asarray(spec["positions"], dtype=float), np.asarray(spec["moduli"], dtype=int)


def _datum(domain, p):
    spec = p.get("datum", "uniform")
    return BoundaryDatum(domain, None if spec == "uniform" else spec)


class Run:
    def __init__(self, scenario, out_dir):
        self.scenario = scenario
        self.out = Path(out_dir)
        self.digest = io.scenario_hash(scenario.to_dict())
        self.domain = build_domain(scenario.domain)

    def path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def report(self, body):
        io.write_report(self.path("report.json"),
                        {"mode": self.scenario.mode, "scenario": self.scenario.to_dict(), **body},
                        self.digest)

    # -- modes ----------------------------------------------------------------

    def simulate(self):
        s, p = self.scenario, self.scenario.params
        engine = _engine(s, self.domain)
        config = Configuration(p["positions"], p["moduli"], self.domain)
        traj = simulate(config, engine, _sim_options(s, p["T_max"]))
        energies = traj.energies(engine)
        # energy descent within ten times the integrator tolerance
        slack = 10.0 * s.tolerances["rel_tol"] * np.maximum(1.0, np.abs(energies[:-1]))
        finite = np.isfinite(energies[1:]) & np.isfinite(energies[:-1])
        alive = np.sum(~np.isnan(traj.positions[..., 0]), axis=1)
        same = finite & (alive[1:] == alive[:-1])
        rises = (energies[1:] - energies[:-1])[same]
        descent = bool(np.all(rises <= slack[same]))
        io.write_trajectory_csv(self.path("trajectory.csv"), traj, self.digest)
        io.write_events_jsonl(self.path("events.jsonl"), traj.events, self.digest)
        ev = traj.terminal_event
        self.report({
            "terminal_event": ev.to_dict(),
            "events": [e.to_dict() for e in traj.events],
            "steps": traj.steps,
            "rejections": traj.rejections,
            "initial_energy": energies[0],
            "final_energy": energies[-1],
            "energy_descent": descent,
            "passed": descent,
        })
        summary = f"simulate: {ev.kind} t={ev.time:.3e} energy descent {'ok' if descent else 'violated'}"
        return descent, summary

    def _verify(self, report, name):
        traj = report.trajectory
        io.write_trajectory_csv(self.path("trajectory.csv"), traj, self.digest)
        io.write_events_jsonl(self.path("events.jsonl"), traj.events, self.digest)
        self.report(report.to_dict())
        verdict = "<=" if report.measured <= report.limit else ">"
        first = "" if report.first_event_ok else f" (first event {report.first_event})"
        if report.kind == "boundary":
            bound = (f"{report.bound:.3e}*(1+K*delta0) = {report.limit:.3e}")
        else:
            bound = f"{report.limit:.3e}"
        return report.passed, f"{name}: T={report.measured:.3e} {verdict} bound {bound}{first}"

    def verify_boundary(self):
        s, p = self.scenario, self.scenario.params
        bound = 2.0 * math.pi * p["delta0"] ** 2
        T_max = p["T_max"] if p["T_max"] is not None else 20.0 * bound
        report = verify_boundary_bound(
            self.domain, _engine(s, self.domain), p["delta0"], p["gamma0"],
            spectators=_spectators(p), K=p["K"],
            opts=_sim_options(s, T_max, default_collision_radius(self.domain, p["delta0"])),
            boundary_parameter=p["boundary_parameter"], modulus=p["modulus"])
        return self._verify(report, "verify-boundary")

    def verify_pair(self):
        s, p = self.scenario, self.scenario.params
        spec = _spectators(p)
        n = 2 + (0 if spec is None else len(spec[0]))
        T_max = p["T_max"] if p["T_max"] is not None else 20.0 * pair_bound(
            p["zeta0"], p["eta0"], n)
        report = verify_pair_bound(
            self.domain, _engine(s, self.domain), p["zeta0"], p["eta0"], spectators=spec,
            opts=_sim_options(s, T_max, default_collision_radius(self.domain, p["zeta0"])),
            center=p["center"], direction=p["direction"])
        return self._verify(report, "verify-pair")

    def green_check(self):
        s, p = self.scenario, self.scenario.params
        if not self.domain.is_disk:
            raise ConfigError("domain", "green-check compares against the disk closed form")
        image = GreenEngine(self.domain, "image")
        bie = GreenEngine(self.domain, "bie", s.green["panels"])
        rng = np.random.default_rng(s.seed)
        m = p["pairs"]
        rad = p["radius_fraction"] * self.domain.radius
        r = rad * np.sqrt(rng.random((2, m)))
        th = 2.0 * math.pi * rng.random((2, m))
        pts = self.domain.center + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        x, y = pts[0], pts[1]
        k_err = max(abs(bie.regular_part(a, b) - image.regular_part(a, b)) for a, b in zip(x, y))
        rel = x - self.domain.center
        R = self.domain.radius
        robin_closed = np.log((R * R - np.sum(rel * rel, axis=1)) / R) / (2.0 * math.pi)
        h_err = float(np.max(np.abs(image.robin_many(x) - robin_closed)))
        h_bie = float(np.max(np.abs(bie.robin_many(x) - robin_closed)))
        tol = s.tolerances["check_tol"]
        passed = bool(k_err < tol and h_err < 1e-10)
        self.report({
            "pairs": m,
            "panels": s.green["panels"],
            "max_k_error": k_err,
            "max_robin_error_image": h_err,
            "max_robin_error_bie": h_bie,
            "condition_number": bie.solver.condition_number,
            "tolerance": tol,
            "passed": passed,
        })
        return passed, f"green-check: max|k_bie - k_image|={k_err:.3e} {'<' if k_err < tol else '>='} {tol:.1e}"

    def _min_options(self, p):
        return MinimizeOptions(starts=p["starts"], tol=p["tol"], max_iter=p["max_iter"],
                               seed=self.scenario.seed, workers=worker_count(self.scenario))

    def minimize(self):
        p = self.scenario.params
        datum = _datum(self.domain, p)
        opts = self._min_options(p)
        if p["eps"] is None:
            rep = minimize_limit(self.domain, datum, p["n"], opts)
        else:
            rep = minimize_finite_eps(self.domain, datum, p["n"], p["eps"], opts)
        passed = bool(rep.margin > 0 and rep.value <= min(rep.endpoint_values))
        self.report({**rep.to_dict(), "passed": passed})
        pts = " ".join(f"({x:.4f},{y:.4f})" for x, y in rep.argmin)
        return passed, f"minimize: F={rep.value:.6e} at {pts} margin={rep.margin:.3e}"

    def converge(self):
        s, p = self.scenario, self.scenario.params
        eps = [float(e) for e in p["eps_list"]]
        rows = []
        if p["kind"] == "core_energy":
            engine = _engine(s, self.domain)
            config = Configuration(p["positions"], p["moduli"], self.domain)
            target = renormalized_energy(config, engine)
            slope_theory = float(np.sum(config.moduli.astype(float) ** 2)) / (4.0 * math.pi)
            for e in eps:
                E = core_energy(config, engine, e)
                rows.append({"eps": e, "energy": E,
                             "renormalized": E - slope_theory * abs(math.log(e)),
                             "gap": E - slope_theory * abs(math.log(e)) - target})
            slope, intercept = np.polyfit([abs(math.log(e)) for e in eps],
                                          [r["energy"] for r in rows], 1)
            passed = bool(abs(slope - slope_theory) < 1e-3 * slope_theory
                          and abs(intercept - target) < 1e-3 * max(1.0, abs(target)))
            body = {"slope": slope, "slope_theory": slope_theory, "intercept": intercept,
                    "renormalized_energy": target}
            summary = f"converge: intercept={intercept:.6e} vs E_n={target:.6e}"
        else:
            datum = _datum(self.domain, p)
            c = np.asarray(p["centers"], dtype=float)
            if len(c) == 1:
                target = limit_functional(self.domain, datum, c[0])
            else:
                target = limit_functional_n(self.domain, datum, c)
            for e in eps:
                F = renormalize(finite_eps_energy(self.domain, datum, c, e), len(c), e)
                rows.append({"eps": e, "energy": F + math.pi * len(c) * abs(math.log(e)),
                             "renormalized": F, "gap": abs(F - target)})
            gaps = [r["gap"] for r in rows]
            passed = bool(all(a > b for a, b in zip(gaps, gaps[1:])))
            body = {"limit_value": target}
            summary = f"converge: |F_eps - F| from {gaps[0]:.3e} to {gaps[-1]:.3e}"
        io.write_table_csv(self.path("converge.csv"), rows,
                           ["eps", "energy", "renormalized", "gap"], self.digest)
        self.report({**body, "rows": rows, "passed": passed})
        return passed, summary

    def sweep(self):
        p = self.scenario.params
        datum = _datum(self.domain, p)
        result = confinement_sweep(self.domain, datum, p["n"], p["eps_list"],
                                   self._min_options(p), proxy=p["proxy"])
        n = p["n"]
        columns = (["eps"] + [f"{c}{i + 1}" for i in range(n) for c in ("x", "y")]
                   + ["margin", "value", "value_gap", "converged"])
        keys = ["eps", "margin", "value", "value_gap", "converged"]
        if n > 1:
            columns.insert(-1, "min_pair_distance")
            keys.append("min_pair_distance")
        rows = []
        for r in result.rows:
            row = {k: r[k] for k in keys}
            for i, (x, y) in enumerate(r["argmin"]):
                row[f"x{i + 1}"], row[f"y{i + 1}"] = x, y
            rows.append(row)
        io.write_table_csv(self.path("sweep.csv"), rows, columns, self.digest)
        self.report({
            "limit": result.limit.to_dict(),
            "rows": [{**r, "argmin": r["argmin"].tolist()} for r in result.rows],
            "uniform": result.uniform,
            "largest_confined_eps": result.largest_confined_eps,
            "passed": result.uniform,
        })
        margins = [r["margin"] for r in result.rows]
        return result.uniform, (f"sweep: margins {min(margins):.3e}..{max(margins):.3e} "
                                f"uniform={'yes' if result.uniform else 'no'}")


def run(scenario, out_dir=None):
    """Execute a scenario; returns ``(passed, summary)``."""
    runner = Run(scenario, out_dir or scenario.output["dir"])
    return getattr(runner, scenario.mode.replace("-", "_"))()


def build_parser():
    parser = argparse.ArgumentParser(prog="dislocore", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=None, help="output directory (overrides the scenario)")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = Scenario.load(args.scenario)
        if scenario.mode != args.mode:
            raise ConfigError("mode", f"scenario declares {scenario.mode!r}, "
                                      f"command line asks for {args.mode!r}")
        passed, summary = run(scenario, args.out)
    except ConfigError as exc:
        print(f"error: config field {exc}", file=sys.stderr)
        return EXIT_ERROR
    except DislocoreError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not args.quiet:
        print(f"{summary} {'PASS' if passed else 'FAIL'}")
    return EXIT_PASS if passed else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
