import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ergoflow.bounds import lambda_peak
from ergoflow.cli import main
from ergoflow.ensemble import QuditHamiltonian, product_state
from ergoflow.scenarios import gibbs
from ergoflow.work import work_of_swap


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


MC3 = {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 3}, "state": {"microcanonical": {"E0": 2, "delta": 0}}}


def test_maxwork_examples(tmp_path, capsys):
    doc = {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 2}, "state": {"populations": [0.1, 0.2, 0.3, 0.4]}}
    code, out, _ = run(capsys, "maxwork", "--scenario", write(tmp_path, doc))
    assert code == 0
    (row,) = rows_of(out)
    assert float(row["work"]) == pytest.approx(0.6, abs=1e-15)
    assert float(row["initial_energy"]) == pytest.approx(1.3, abs=1e-15)
    assert row["passive"] == "false"

    g = gibbs(QuditHamiltonian((0.0, 1.0, 2.0)), 0.8).tolist()
    passive = {"hamiltonian": {"levels": [0, 1, 2]}, "ensemble": {"N": 3}, "state": {"product": g}}
    (row,) = rows_of(run(capsys, "maxwork", "--scenario", write(tmp_path, passive))[1])
    assert float(row["work"]) == 0 and row["passive"] == "true"
    # a tensor power of a passive (non-Gibbs) spectrum is active
    active = {"hamiltonian": {"levels": [0, 1, 2]}, "ensemble": {"N": 3}, "state": {"product": [0.5, 0.4, 0.1]}}
    (row,) = rows_of(run(capsys, "maxwork", "--scenario", write(tmp_path, active))[1])
    assert float(row["work"]) > 0 and row["passive"] == "false"

    (row,) = rows_of(run(capsys, "maxwork", "--scenario", write(tmp_path, MC3))[1])
    assert float(row["work"]) == pytest.approx(4 / 3, abs=1e-15)


def test_renormalize_flag(tmp_path, capsys):
    doc = {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 1}, "state": {"populations": [3, 7]}}
    code, _, err = run(capsys, "maxwork", "--scenario", write(tmp_path, doc))
    assert code == 2 and "sum" in err
    doc["state"]["renormalize"] = True
    code, out, _ = run(capsys, "maxwork", "--scenario", write(tmp_path, doc))
    assert code == 0 and float(rows_of(out)[0]["work"]) == pytest.approx(0.4, abs=1e-15)


def _path_doc(kind, **extra):
    proto = {"kind": kind, **extra}
    return {
        "hamiltonian": {"levels": [0, 1, 1.5]},
        "ensemble": {"N": 3},
        "state": {"product": [0.7, 0.2, 0.1]},
        "protocol": proto,
        "pair": ["000", "122"],
        "sampling": {"time_samples": 21},
    }


def test_path_indirect_never_entangles(tmp_path, capsys):
    code, out, _ = run(capsys, "path", "--scenario", write(tmp_path, _path_doc("indirect")))
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 5 * 21
    assert {r["step_index"] for r in rows} == {str(i) for i in range(5)}
    assert all(float(r["lambda_1"]) <= 1e-12 and r["class"] == "SEP" for r in rows)


def test_path_direct_peak_matches(tmp_path, capsys):
    code, out, _ = run(capsys, "path", "--scenario", write(tmp_path, _path_doc("direct")))
    rows = rows_of(out)
    mid = [r for r in rows if float(r["s"]) == 0.5]
    (row,) = mid
    state = product_state([0.7, 0.2, 0.1], 3)
    peak = lambda_peak(state, (1, 1, 1), (2, 3, 3))
    assert float(row["lambda_1"]) == pytest.approx(peak.first, abs=1e-12)
    assert float(row["lambda_last"]) == pytest.approx(peak.last, abs=1e-12)
    end = rows[-1]
    H = QuditHamiltonian((0, 1, 1.5))
    assert float(end["cumulative_work"]) == pytest.approx(work_of_swap(state, (1, 1, 1), (2, 3, 3), H), abs=1e-15)


def test_path_hybrid_full_is_direct(tmp_path, capsys):
    direct = run(capsys, "path", "--scenario", write(tmp_path, _path_doc("direct"), "a.json"))[1]
    hybrid = run(capsys, "path", "--scenario", write(tmp_path, _path_doc("hybrid", l=3), "b.json"))[1]
    assert direct == hybrid
    code, _, err = run(capsys, "path", "--scenario", write(tmp_path, _path_doc("hybrid", l=4), "c.json"))
    assert code == 2


def test_path_ladder(tmp_path, capsys):
    doc = _path_doc("ladder", K=3)
    doc["hamiltonian"]["levels"] = [0, 1, 2]
    doc["ensemble"]["N"] = 6
    doc["state"]["product"] = [0.5, 0.4, 0.1]
    del doc["pair"]
    code, out, err = run(capsys, "path", "--scenario", write(tmp_path, doc))
    assert code == 0, err
    assert len(rows_of(out)) % 21 == 0


def test_path_needs_pair(tmp_path, capsys):
    doc = _path_doc("direct")
    del doc["pair"]
    code, _, err = run(capsys, "path", "--scenario", write(tmp_path, doc))
    assert code == 2 and "pair" in err


def test_figure1_small_grid(tmp_path, capsys):
    doc = {"hamiltonian": {"levels": [0, 1, 1]}, "ensemble": {"N": 4}, "state": {"product": [0.4, 0.3, 0.3]}}
    code, out, _ = run(capsys, "figure1", "--scenario", write(tmp_path, doc), "--grid", "21")
    assert code == 0
    rows = rows_of(out)
    for r in rows:
        l1, l5, l7 = float(r["lambda_1"]), float(r["lambda_5"]), float(r["lambda_7"])
        want = "GME" if l7 > 0 else "l<=2" if l5 > 0 else "l<=3" if l1 > 0 else "SEP"
        assert r["class"] == want
    corner = [r for r in rows if float(r["p0"]) == 1.0]
    assert float(corner[0]["work"]) == 0
    code, out, _ = run(capsys, "figure1", "--scenario", write(tmp_path, doc), "--grid", "21", "--slice", "0.55")
    sl = rows_of(out)
    assert sl and all(float(r["p0"]) == 0.55 for r in sl)
    works = [float(r["work"]) for r in sl]
    assert works == sorted(works)
    assert all(float(r["gme"]) >= 0 for r in sl)


def test_figure1_rejects_other_levels(tmp_path, capsys):
    doc = {"hamiltonian": {"levels": [0, 1, 2]}, "ensemble": {"N": 4}, "state": {"product": [0.4, 0.3, 0.3]}}
    assert run(capsys, "figure1", "--scenario", write(tmp_path, doc))[0] == 2


def _passive(tmp_path, capsys, p, N=4, levels=(0, 1, 2), **sampling):
    doc = {"hamiltonian": {"levels": list(levels)}, "ensemble": {"N": N}, "state": {"product": list(p)}}
    if sampling:
        doc["sampling"] = sampling
    code, out, err = run(capsys, "passive", "--scenario", write(tmp_path, doc))
    assert code == 0, err
    return rows_of(out)


def _get(rows, section, key, **match):
    return [r["value"] for r in rows if r["section"] == section and r["key"] == key
            and all(r[k] == str(v) for k, v in match.items())]


def test_passive_thermal_input(tmp_path, capsys):
    g = gibbs(QuditHamiltonian((0.0, 1.0, 2.0)), 0.8).tolist()
    rows = _passive(tmp_path, capsys, g)
    assert abs(float(_get(rows, "exchange", "bound")[0])) < 1e-9
    assert _get(rows, "exchange", "class_pairs") == ["0"]


def test_passive_sweep_trend(tmp_path, capsys):
    rows = _passive(tmp_path, capsys, [0.5, 0.4, 0.1], N=8, sweep_max_N=8)
    gaps = {int(r["N"]): float(r["value"]) for r in rows if r["section"] == "sweep" and r["key"] == "relative_gap"}
    assert gaps[8] < gaps[4] < gaps[2]
    bounds = [float(r["value"]) for r in rows if r["section"] == "sweep" and r["key"] == "bound"]
    exact = [float(r["value"]) for r in rows if r["section"] == "sweep" and r["key"] == "exact"]
    assert all(b >= e for b, e in zip(bounds, exact))


def test_passive_threshold_columns(tmp_path, capsys):
    rows = _passive(tmp_path, capsys, [0.5, 0.4, 0.1], N=5)
    paper = _get(rows, "threshold", "paper_ratio", gamma=1)
    exact = _get(rows, "threshold", "exact_ratio", gamma=1)
    assert paper == exact and float(paper[0]) == pytest.approx(3 + 2 * math.sqrt(2), rel=1e-15)
    p7 = _get(rows, "threshold", "paper_ratio", gamma=13)
    e7 = _get(rows, "threshold", "exact_ratio", gamma=13)
    assert float(p7[0]) < float(e7[0])
    ls = sorted({int(r["l"]) for r in rows if r["section"] == "threshold"})
    assert ls == [1, 2, 3, 4]


def test_passive_needs_product(tmp_path, capsys):
    assert run(capsys, "passive", "--scenario", write(tmp_path, MC3))[0] == 2


def test_microcanonical_command(tmp_path, capsys):
    code, out, _ = run(capsys, "microcanonical", "--scenario", write(tmp_path, MC3), "--samples", "51")
    assert code == 0
    rows = rows_of(out)
    assert float(rows[-1]["cumulative_work"]) == pytest.approx(4 / 3, abs=1e-15)
    assert float(rows[-1]["optimal_work"]) == pytest.approx(4 / 3, abs=1e-15)
    assert rows[0]["n1"] == "2" and rows[0]["gme_throughout"] == "true"


def test_jsonl_and_roundtrip(tmp_path, capsys):
    path = write(tmp_path, _path_doc("direct"))
    csv_text = run(capsys, "path", "--scenario", path)[1]
    jsonl_text = run(capsys, "path", "--scenario", path, "--format", "jsonl")[1]
    records = [json.loads(line) for line in jsonl_text.splitlines()]
    rows = rows_of(csv_text)
    assert len(records) == len(rows)
    for rec, row in zip(records, rows):
        for key in ("pop_alpha", "abs_coherence", "lambda_1", "cumulative_work"):
            assert rec[key] == float(row[key])
    # 17 significant digits reproduce every double exactly
    state = product_state([0.7, 0.2, 0.1], 3)
    pa = float(rows[0]["pop_alpha"])
    assert pa == state.population((1, 1, 1))


def test_output_deterministic_and_out_file(tmp_path, capsys):
    path = write(tmp_path, _path_doc("indirect"))
    a = run(capsys, "path", "--scenario", path)[1]
    b = run(capsys, "path", "--scenario", path)[1]
    assert a == b
    target = tmp_path / "out.csv"
    assert run(capsys, "path", "--scenario", path, "--out", str(target))[0] == 0
    assert target.read_text() == a


def test_output_section_in_scenario(tmp_path, capsys):
    target = tmp_path / "res.jsonl"
    doc = dict(MC3, output={"format": "jsonl", "path": str(target)})
    assert run(capsys, "microcanonical", "--scenario", write(tmp_path, doc))[0] == 0
    assert json.loads(target.read_text().splitlines()[0])["exchange"] == 0


@pytest.mark.parametrize("doc", [
    {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 2}, "state": {"product": [0.5, 0.5]}, "extra": 1},
    {"hamiltonian": {"levels": [0, 1], "x": 0}, "ensemble": {"N": 2}, "state": {"product": [0.5, 0.5]}},
    {"hamiltonian": {"levels": [1, 0]}, "ensemble": {"N": 2}, "state": {"product": [0.5, 0.5]}},
    {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 0}, "state": {"product": [0.5, 0.5]}},
    {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 2}, "state": {"product": [0.5, 0.5], "populations": [1]}},
    {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 2}, "state": {"product": [0.5, 0.6]}},
    {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 2}, "state": {"populations": [1, 0]}},
])
def test_validation_errors(tmp_path, capsys, doc):
    code, _, err = run(capsys, "maxwork", "--scenario", write(tmp_path, doc))
    assert code == 2 and err.startswith("ergoflow:")


def test_bad_json_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "maxwork", "--scenario", str(bad))[0] == 2
    assert run(capsys, "maxwork", "--scenario", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "nope")[0] == 2


def test_cap_exit_code(tmp_path, capsys):
    doc = {"hamiltonian": {"levels": [0, 1]}, "ensemble": {"N": 30}, "state": {"product": [0.6, 0.4]}}
    code, _, err = run(capsys, "maxwork", "--scenario", write(tmp_path, doc))
    assert code == 3 and "cap" in err


def test_console_entry_point(tmp_path):
    path = write(tmp_path, MC3)
    res = subprocess.run([sys.executable, "-m", "ergoflow", "maxwork", "--scenario", path],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "N,d,initial_energy,final_energy,work,passive"
    np.testing.assert_allclose(float(res.stdout.splitlines()[1].split(",")[4]), 4 / 3, atol=1e-15)
