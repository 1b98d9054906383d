"""Batch front-end: a JSON scenario file in, a CSV or JSON-lines table out.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 size cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import bounds
from .ensemble import (
    CapacityError,
    DiagonalState,
    EnsembleShape,
    QuditHamiltonian,
    differing_sites,
    energy_of_label,
    format_label,
    parse_label,
    product_state,
)
from .entropy import shannon_entropy
from .paths import direct_plan, evolve_step, hybrid_plan, indirect_plan, ladder_plan
from .scenarios import (
    asymptotic_work_bound,
    entanglement_condition,
    figure1_scan,
    figure1_slice,
    microcanonical,
    microcanonical_plan,
    passive_ensemble,
    typical_exchange_plan,
    typical_summary,
)
from .work import apply_swap, is_passive, optimal_permutation, total_energy

EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 2, 3
PATH_CAP = 2**20
SWEEP_CAP = 2**16

_number = {"type": "number"}
_spectrum = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["hamiltonian", "ensemble", "state"],
    "properties": {
        "hamiltonian": {
            "type": "object",
            "additionalProperties": False,
            "required": ["levels"],
            "properties": {"levels": {"type": "array", "items": _number, "minItems": 2}},
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "required": ["N"],
            "properties": {"N": {"type": "integer", "minimum": 1}},
        },
        "state": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["product"],
                    "properties": {"product": _spectrum},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["microcanonical"],
                    "properties": {
                        "microcanonical": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["E0", "delta"],
                            "properties": {"E0": _number, "delta": {"type": "number", "minimum": 0}},
                        }
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["populations"],
                    "properties": {
                        "populations": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "renormalize": {"type": "boolean"},
                    },
                },
            ]
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["direct", "indirect", "hybrid", "ladder"]},
                "l": {"type": "integer", "minimum": 1},
                "K": {"type": "integer", "minimum": 1},
            },
        },
        "pair": {
            "type": "array",
            "items": {"type": "string", "pattern": "^[0-9]+$"},
            "minItems": 2,
            "maxItems": 2,
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "time_samples": {"type": "integer", "minimum": 2},
                "grid": {"type": "integer", "minimum": 2},
                "sweep_max_N": {"type": "integer", "minimum": 1},
                "typical_delta": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["csv", "jsonl"]},
                "path": {"type": "string"},
            },
        },
    },
}

COLUMNS = {
    "maxwork": ["N", "d", "initial_energy", "final_energy", "work", "passive"],
    "path": ["step_index", "alpha", "beta", "s", "pop_alpha", "pop_beta", "abs_coherence",
             "lambda_1", "lambda_last", "class", "cumulative_work"],
    "figure1": ["p0", "p1", "p2", "work", "lambda_1", "lambda_5", "lambda_7", "class"],
    "figure1_slice": ["p0", "p1", "p2", "work", "gme", "class"],
    "passive": ["section", "N", "l", "gamma", "key", "value"],
    "microcanonical": ["exchange", "alpha", "beta", "n1", "work", "cumulative_work",
                       "gme_throughout", "min_interior_lambda_last", "optimal_work"],
}


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------- scenario loading

class Scenario:
    """Validated scenario document with typed accessors."""

    def __init__(self, doc: dict):
        try:
            jsonschema.validate(doc, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"scenario invalid at {where}: {exc.message}") from None
        self.doc = doc
        self.H = QuditHamiltonian(tuple(doc["hamiltonian"]["levels"]))
        self.N = doc["ensemble"]["N"]
        self.shape = EnsembleShape(self.N, self.H.d)
        self.sampling = doc.get("sampling", {})
        self.output = doc.get("output", {})

    @property
    def state_kind(self) -> str:
        return next(k for k in ("product", "microcanonical", "populations") if k in self.doc["state"])

    def spectrum(self) -> np.ndarray:
        if self.state_kind != "product":
            raise ScenarioError("this command needs a product state")
        p = np.asarray(self.doc["state"]["product"], dtype=float)
        if p.size != self.H.d:
            raise ScenarioError(f"product spectrum has {p.size} entries, Hamiltonian has {self.H.d} levels")
        return p

    def diagonal_state(self, cap: int) -> DiagonalState:
        st = self.doc["state"]
        kind = self.state_kind
        if kind == "product":
            self.shape.check_dense(cap)
            return product_state(self.spectrum(), self.N, cap)
        if kind == "microcanonical":
            mc = st["microcanonical"]
            return microcanonical(self.H, self.N, mc["E0"], mc["delta"], cap).state
        self.shape.check_dense(cap)
        if len(st["populations"]) != self.shape.size:
            raise ScenarioError(f"expected {self.shape.size} populations (d**N), got {len(st['populations'])}")
        return DiagonalState.from_populations(self.shape, st["populations"], st.get("renormalize", False), cap)

    def pair(self):
        if "pair" not in self.doc:
            raise ScenarioError("this command needs a 'pair' of digit strings")
        a, b = (self.shape.check_label(parse_label(t, self.H.d)) for t in self.doc["pair"])
        if a == b:
            raise ScenarioError("pair labels must differ")
        return a, b


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    return Scenario(doc)


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g") if math.isfinite(x) else "null"
    if x is None or x == "":
        return "null"
    return json.dumps(str(x))


def render(columns: list[str], rows: list[dict], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    else:
        for row in rows:
            buf.write("{" + ", ".join(f"{json.dumps(c)}: {_json_value(row[c])}" for c in columns) + "}\n")
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def cmd_maxwork(sc: Scenario, args) -> list[dict]:
    state = sc.diagonal_state(cap=2**24)
    rep = optimal_permutation(state, sc.H)
    return [{
        "N": sc.N, "d": sc.H.d,
        "initial_energy": rep.initial_energy, "final_energy": rep.final_energy,
        "work": rep.work, "passive": is_passive(state, sc.H),
    }]


def _build_plans(sc: Scenario, alpha, beta):
    proto = sc.doc.get("protocol", {"kind": "direct"})
    kind = proto["kind"]
    if kind == "direct":
        return [direct_plan(alpha, beta)]
    if kind == "indirect":
        return [indirect_plan(alpha, beta)]
    if kind == "hybrid":
        if "l" not in proto:
            raise ScenarioError("hybrid protocol needs 'l'")
        return [hybrid_plan(alpha, beta, proto["l"])]
    if "K" not in proto:
        raise ScenarioError("ladder protocol needs 'K'")
    p = sc.spectrum()
    q = passive_ensemble(sc.H, p, sc.N).q
    return [r.plan for r in ladder_plan(p, q, proto["K"], sc.N) if r.plan.steps]


def _snapshot_lambda(snap):
    _, n1 = differing_sites(snap.alpha, snap.beta)
    return bounds.lambda_at(snap, sites="differing" if n1 >= 2 else "all")


def cmd_path(sc: Scenario, args) -> list[dict]:
    samples = args.samples or sc.sampling.get("time_samples", 101)
    if samples < 2:
        raise ScenarioError("need at least 2 time samples")
    state = sc.diagonal_state(cap=PATH_CAP)
    kind = sc.doc.get("protocol", {"kind": "direct"})["kind"]
    if kind == "ladder":
        plans = _build_plans(sc, None, None)
    else:
        plans = _build_plans(sc, *sc.pair())
    s_grid = np.linspace(0.0, 1.0, samples)
    initial = total_energy(state, sc.H)
    rows = []
    index = 0
    for plan in plans:
        for step in plan.steps:
            Ea, Eb = energy_of_label(sc.H, step.alpha), energy_of_label(sc.H, step.beta)
            Pa, Pb = state.population(step.alpha), state.population(step.beta)
            pre = total_energy(state, sc.H)
            for s in s_grid:
                snap = evolve_step(state, step, float(s))
                lv = _snapshot_lambda(snap)
                energy = pre + (snap.pop_alpha - Pa) * Ea + (snap.pop_beta - Pb) * Eb
                rows.append({
                    "step_index": index,
                    "alpha": format_label(step.alpha), "beta": format_label(step.beta),
                    "s": float(s),
                    "pop_alpha": snap.pop_alpha, "pop_beta": snap.pop_beta,
                    "abs_coherence": abs(snap.coherence),
                    "lambda_1": lv.first if len(lv) else math.nan,
                    "lambda_last": lv.last if len(lv) else math.nan,
                    "class": bounds.classify(lv).label,
                    "cumulative_work": initial - energy,
                })
            state = apply_swap(state, step.alpha, step.beta)
            index += 1
    return rows


def _check_figure1_hamiltonian(H: QuditHamiltonian) -> float:
    lv = H.levels
    if H.d != 3 or lv[0] != 0 or lv[1] != lv[2] or lv[1] <= 0:
        raise ScenarioError("figure1 needs levels [0, eps, eps] with eps > 0")
    return float(lv[1])


def cmd_figure1(sc: Scenario, args) -> list[dict]:
    eps = _check_figure1_hamiltonian(sc.H)
    if sc.N != 4:
        raise ScenarioError("figure1 is defined for N = 4")
    grid = args.grid or sc.sampling.get("grid", 201)
    rows = figure1_scan(grid, eps)
    if args.slice is not None:
        picked = figure1_slice(rows, args.slice, tol=0.5 / (grid - 1))
        return [{"p0": r.p0, "p1": r.p1, "p2": r.p2, "work": r.work,
                 "gme": max(0.0, r.lambda_7), "class": r.label} for r in picked]
    return [{"p0": r.p0, "p1": r.p1, "p2": r.p2, "work": r.work, "lambda_1": r.lambda_1,
             "lambda_5": r.lambda_5, "lambda_7": r.lambda_7, "class": r.label} for r in rows]


def cmd_passive(sc: Scenario, args) -> list[dict]:
    p = sc.spectrum()
    pe = passive_ensemble(sc.H, p, sc.N)
    eps = sc.H.as_array()
    rows = []

    def put(section, key, value, N="", l="", gamma=""):
        rows.append({"section": section, "N": N, "l": l, "gamma": gamma, "key": key, "value": value})

    put("match", "T", pe.T)
    for k, qk in enumerate(pe.q, start=1):
        put("match", f"q_{k}", float(qk))
    put("match", "entropy_p", shannon_entropy(p))
    put("match", "entropy_q", shannon_entropy(pe.q))
    put("match", "divergence_p_q", pe.divergence_p_q)
    put("match", "divergence_q_p", pe.divergence_q_p)
    put("match", "energy_gap", math.fsum((p - pe.q) * eps))

    sweep_max = sc.sampling.get("sweep_max_N", min(sc.N, 12))
    for n in range(1, sweep_max + 1):
        if sc.H.d**n > SWEEP_CAP:
            break
        sub = passive_ensemble(sc.H, p, n)
        bound = asymptotic_work_bound(sub)
        exact = optimal_permutation(product_state(p, n), sc.H).work
        gap = (bound - exact) / bound if bound > 1e-12 else math.nan
        put("sweep", "bound", bound, N=n)
        put("sweep", "exact", exact, N=n)
        put("sweep", "relative_gap", gap, N=n)

    for l in range(1, sc.N):
        cond = entanglement_condition(pe, l)
        put("threshold", "paper_ratio", bounds.threshold_ratio_paper(cond.gamma), N=sc.N, l=l, gamma=cond.gamma)
        put("threshold", "exact_ratio", bounds.threshold_ratio_exact(cond.gamma), N=sc.N, l=l, gamma=cond.gamma)
        put("threshold", "paper_rate", cond.paper_rate, N=sc.N, l=l, gamma=cond.gamma)
        put("threshold", "exact_rate", cond.exact_rate, N=sc.N, l=l, gamma=cond.gamma)
        put("threshold", "paper_condition", cond.paper, N=sc.N, l=l, gamma=cond.gamma)
        put("threshold", "exact_condition", cond.exact, N=sc.N, l=l, gamma=cond.gamma)

    delta = sc.sampling.get("typical_delta", 0.05)
    ts = typical_summary(p, sc.N, delta, label_cap=0)
    put("typical", "delta", ts.delta, N=sc.N)
    put("typical", "entropy", ts.entropy, N=sc.N)
    put("typical", "log_cardinality_per_site", ts.log_cardinality / sc.N, N=sc.N)
    put("typical", "probability", ts.probability, N=sc.N)
    put("typical", "classes", len(ts.compositions), N=sc.N)

    te = typical_exchange_plan(pe, delta=delta, cap=0)
    put("exchange", "log_ratio", te.log_ratio, N=sc.N)
    put("exchange", "log_ratio_ideal", te.log_ratio_ideal, N=sc.N)
    put("exchange", "initial_energy", te.initial_energy, N=sc.N)
    put("exchange", "achieved_energy", te.achieved_energy, N=sc.N)
    put("exchange", "thermal_energy", te.thermal_energy, N=sc.N)
    put("exchange", "bound", asymptotic_work_bound(pe), N=sc.N)
    put("exchange", "class_pairs", len(te.exchanges), N=sc.N)
    put("exchange", "transpositions", sum(x.count for x in te.exchanges), N=sc.N)
    return rows


def cmd_microcanonical(sc: Scenario, args) -> list[dict]:
    if sc.state_kind != "microcanonical":
        raise ScenarioError("this command needs a microcanonical state")
    mc = sc.doc["state"]["microcanonical"]
    scen = microcanonical(sc.H, sc.N, mc["E0"], mc["delta"])
    samples = args.samples or sc.sampling.get("time_samples", 101)
    if samples < 3:
        raise ScenarioError("need at least 3 time samples")
    res = microcanonical_plan(scen, samples)
    optimal = optimal_permutation(scen.state, sc.H).work
    rows, cumulative = [], 0.0
    for i, ex in enumerate(res.exchanges):
        cumulative += ex.work
        rows.append({
            "exchange": i,
            "alpha": format_label(ex.alpha), "beta": format_label(ex.beta),
            "n1": ex.n1, "work": ex.work, "cumulative_work": cumulative,
            "gme_throughout": ex.gme_throughout,
            "min_interior_lambda_last": ex.min_lambda_last,
            "optimal_work": optimal,
        })
    return rows


COMMANDS = {
    "maxwork": (cmd_maxwork, "optimal work by sorted pairing"),
    "path": (cmd_path, "time-resolved simulation of a transposition protocol"),
    "figure1": (cmd_figure1, "four-qutrit exchange scan over passive spectra"),
    "passive": (cmd_passive, "thermal match, bound sweep, thresholds and typical sets"),
    "microcanonical": (cmd_microcanonical, "exchange plan for a microcanonical shell"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergoflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--format", choices=["csv", "jsonl"], help="output format (default csv)")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--samples", type=int, help="time samples per step")
        sp.add_argument("--grid", type=int, help="grid resolution for scans")
        if name == "figure1":
            sp.add_argument("--slice", type=float, metavar="P0", help="emit only the rows at this p0, ordered by work")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    func, _ = COMMANDS[args.command]
    try:
        sc = load_scenario(args.scenario)
        rows = func(sc, args)
        fmt = args.format or sc.output.get("format", "csv")
        columns = COLUMNS["figure1_slice" if getattr(args, "slice", None) is not None else args.command]
        text = render(columns, rows, fmt)
        out = args.out or sc.output.get("path")
        if out:
            Path(out).write_text(text)
        else:
            sys.stdout.write(text)
    except CapacityError as exc:
        print(f"ergoflow: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ScenarioError, ValueError) as exc:
        print(f"ergoflow: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
