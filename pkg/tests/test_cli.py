import json

import pytest

from soficlab import modelio
from soficlab.cli import main, stable_text
from soficlab.construct import regular_model
from soficlab.groups import cyclic
from soficlab.permcore import Perm
from soficlab.verify import SoficAssignment


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    lines = text.strip().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


@pytest.fixture
def z3_file(tmp_path):
    path = tmp_path / "z3.json"
    modelio.save(regular_model(cyclic(3), 2, 3), path)
    return path


@pytest.fixture
def flipped_file(tmp_path):
    # swap two image points of the regular z4 generator
    a = regular_model(cyclic(4), 3, 3).image(1).array.copy()
    a[[0, 1]] = a[[1, 0]]
    s = SoficAssignment.from_generators(cyclic(4), [1], [Perm(a)], 3)
    path = tmp_path / "flip.json"
    modelio.save(s, path)
    return path


class TestVerify:
    def test_exact(self, capsys, z3_file):
        code, out, err = run(capsys, "verify", str(z3_file), "--n", "3", "--delta", "0.01")
        assert code == 0
        assert "seed:" in err

    def test_corrupt(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{ not json")
        code, _, _ = run(capsys, "verify", str(p), "--n", "3", "--delta", "0.1")
        assert code == 2

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "verify", str(tmp_path / "nope.json"), "--delta", "0.1")
        assert code == 2

    def test_perturbed(self, capsys, flipped_file):
        code, out, _ = run(capsys, "verify", str(flipped_file), "--n", "3", "--delta", "0.01")
        assert code == 1
        assert "worst tuple" in out
        assert "passed           False" in out

    def test_json(self, capsys, flipped_file):
        code, out, _ = run(capsys, "verify", str(flipped_file), "--n", "3", "--delta", "0.01", "--json")
        assert json.loads(out)["worst_tuple"]


class TestCensus:
    def test_z2_rows(self, capsys):
        code, out, _ = run(capsys, "census", "--group", "z2", "--F", "g", "--n", "3", "--delta", "0.2", "--d-list", "2..8:2")
        assert code == 0
        rows = csv_rows(out)
        assert [r["count"] for r in rows] == ["1", "3", "15", "105"]

    def test_orbit_mode_matches(self, capsys):
        _, out, _ = run(capsys, "census", "--group", "z2", "--F", "g", "--n", "3", "--delta", "0.2", "--d-list", "2..8:2", "--orbit-mode")
        assert [r["count"] for r in csv_rows(out)] == ["1", "3", "15", "105"]

    def test_witnesses(self, capsys, tmp_path):
        w = tmp_path / "w.json"
        code, _, _ = run(capsys, "census", "--group", "z2", "--F", "g", "--n", "3", "--delta", "0.2", "--d", "4", "--witnesses", "--witness-out", str(w))
        assert code == 0
        models = json.loads(w.read_text())
        assert len(models) == 3
        for m in models:
            s = modelio.model_from_dict(m)
            assert s.image(1).cycle_type() == (2, 2)

    def test_odd(self, capsys):
        _, out, _ = run(capsys, "census", "--group", "z2", "--F", "g", "--n", "3", "--delta", "0.2", "--d", "5")
        assert csv_rows(out)[0]["count"] == "0"

    def test_regime_error(self, capsys):
        code, _, err = run(capsys, "census", "--group", "z2", "--F", "g", "--n", "3", "--delta", "0.9", "--d", "4")
        assert code == 2
        assert "error" in err

    def test_work_cap(self, capsys):
        code, _, _ = run(capsys, "census", "--group", "F2", "--F", "a,b", "--n", "2", "--delta", "0.3", "--d", "6", "--node-cap", "10")
        assert code == 1


class TestConstruct:
    def test_regular(self, capsys):
        _, out, _ = run(capsys, "construct", "regular", "--group", "z3", "--copies", "2", "--seed", "1")
        s = modelio.loads(out)
        assert s.d == 6
        assert "construction" in json.loads(out)["provenance"]

    def test_freejoin_deterministic(self, capsys):
        argv = ["construct", "freejoin", "--left", "z2", "--right", "z2", "--d", "20", "--seed", "7"]
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b
        assert modelio.loads(a).d == 20

    def test_quasitile(self, capsys):
        _, out, _ = run(capsys, "construct", "quasitile", "--group", "Z", "--shift", "60", "--tile", "0..10", "--eps", "0.05", "--seed", "1")
        assert json.loads(out)["coverage"] == 1.0

    def test_round_trip_all(self, capsys, tmp_path, z3_file):
        cases = [
            ["regular", "--group", "S3"],
            ["amplify", str(z3_file), "--copies", "3"],
            ["freejoin", "--left", "z2", "--right", "z3", "--d", "12"],
            ["amalgamjoin", "--group", "z4*_{z2}z4", "--d", "24"],
            ["bernoulli", str(z3_file), "--nu", "0.5,0.5"],
        ]
        for c in cases:
            code, out, err = run(capsys, "construct", *c, "--seed", "2")
            assert code == 0, err
            m = modelio.loads(out)
            out_file = tmp_path / "m.json"
            modelio.save(m, out_file)
            assert modelio.dumps(modelio.load(out_file)) == modelio.dumps(m)

    def test_conjugator(self, capsys, z3_file):
        code, out, _ = run(capsys, "construct", "conjugator", str(z3_file), str(z3_file), "--seed", "1")
        assert code == 0
        assert json.loads(out)["residual"] == 0.0

    def test_induce(self, capsys, tmp_path):
        _, shift, _ = run(capsys, "construct", "regular", "--group", "Z", "--d", "5", "--seed", "1")
        p = tmp_path / "shift.json"
        p.write_text(shift)
        code, out, err = run(capsys, "construct", "induce", str(p), "--ambient", "Z", "--index", "2", "--seed", "1")
        assert code == 0, err
        assert modelio.loads(out).d == 10


class TestSurvey:
    def test_trace(self, capsys):
        _, out, _ = run(capsys, "survey", "trace", "--d", "10", "--eps", "0.15", "--A", "identity", "--trials", "10000", "--seed", "3")
        row = csv_rows(out)[0]
        f, hw = float(row["fraction"]), float(row["halfwidth"])
        assert abs(f - 0.73576) <= max(3 * hw, 0.03)

    def test_zero_trials(self, capsys):
        code, _, _ = run(capsys, "survey", "trace", "--trials", "0", "--d", "10")
        assert code == 2

    def test_join_trend(self, capsys):
        code, out, _ = run(capsys, "survey", "join", "--left", "z2", "--right", "z2", "--d-list", "20,50,100", "--n", "4", "--delta", "0.3", "--trials", "20", "--seed", "5")
        assert code == 0
        assert len(csv_rows(out)) == 3

    def test_alt_and_conc(self, capsys):
        code, out, _ = run(capsys, "survey", "alt", "--d", "30", "--A", "fpf", "--rho", "1,2,1,2", "--trials", "2000", "--seed", "1")
        assert code == 0 and float(csv_rows(out)[0]["mean"]) < 0.2
        code, out, _ = run(capsys, "survey", "conc", "--d-list", "10,20,40", "--A", "fpf", "--rho", "1,2", "--eps", "1.0", "--trials", "50", "--seed", "1")
        assert code == 0 and all(r["fraction"] == "1.0" for r in csv_rows(out))


class TestRecord:
    def test_replay(self, capsys, tmp_path):
        rec = tmp_path / "rec.json"
        code, out, _ = run(capsys, "survey", "trace", "--d", "8", "--trials", "500", "--record", str(rec))
        data = json.loads(rec.read_text())
        assert data["stdout"] == out
        assert data["exit_code"] == code
        assert {"argv", "config", "seed", "start", "end", "version", "outputs"} <= set(data)
        code, out2, err = run(capsys, "replay", str(rec))
        assert code == 0
        assert out2 == out
        assert "identical" in err

    def test_census_replay(self, capsys, tmp_path):
        rec = tmp_path / "rec.json"
        run(capsys, "census", "--group", "z2", "--F", "g", "--n", "3", "--delta", "0.2", "--d-list", "2..8:2", "--record", str(rec))
        code, out, err = run(capsys, "replay", str(rec))
        assert code == 0 and "identical" in err

    def test_tampered(self, capsys, tmp_path):
        rec = tmp_path / "rec.json"
        run(capsys, "survey", "trace", "--d", "8", "--trials", "500", "--record", str(rec))
        data = json.loads(rec.read_text())
        data["stdout"] = data["stdout"].replace("trace,8", "trace,9")
        rec.write_text(json.dumps(data))
        code, _, err = run(capsys, "replay", str(rec))
        assert code == 1 and "DIFFERENT" in err


def test_stable_text_blanks_seconds():
    a = "group,d,seconds\nz2,4,0.1\n"
    b = "group,d,seconds\nz2,4,0.2\n"
    assert stable_text(a) == stable_text(b)
