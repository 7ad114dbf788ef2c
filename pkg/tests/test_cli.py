import csv
import io
import xml.etree.ElementTree as ET

import pytest

from ginibre_sv.cli import UsageError, main, parse_complex


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("text,value", [
    ("0+1.0e-2i", 0.01j), ("1.5", 1.5 + 0j), ("-2i", -2j), ("i", 1j), ("3-4i", 3 - 4j), ("1e-3+2e-1j", 1e-3 + 0.2j),
])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["", "abc", "1+2k", "1+i+i"])
def test_parse_complex_rejects(text):
    with pytest.raises(UsageError):
        parse_complex(text)


def test_onepoint_smoke_and_round_trip(capsys):
    code, out, _ = run(["onepoint", "--target", "limit-real", "--lambda", "1", "--eta-t", "1", "--delta-t", "0"],
                       capsys)
    assert code == 0
    (r,) = rows(out)
    assert r["converged"] == "true"
    from ginibre_sv.onepoint import eval_limit_real
    from ginibre_sv.phases import ScaledParams
    v = eval_limit_real(ScaledParams(1.0, 1.0, 0.0)).value
    assert complex(float(r["re"]), float(r["im"])) == v


def test_onepoint_compare_rate_column(capsys):
    code, out, _ = run(["onepoint", "--lambda", "1", "--eta-t", "4,8", "--compare", "limit-complex"], capsys)
    assert code == 0
    rs = rows(out)
    assert len(rs) == 2
    for r in rs:
        assert float(r["rate"]) == pytest.approx(float(r["abs_diff"]) * float(r["eta_t"]))


def test_exit_codes(capsys, tmp_path):
    assert run([], capsys)[0] == 64
    assert run(["onepoint", "--bogus", "1"], capsys)[0] == 64
    assert run(["onepoint", "--target", "nope"], capsys)[0] == 64
    assert run(["mc", "--z", "1+2k"], capsys)[0] == 64
    assert run(["onepoint", "--target", "finite-n", "--n", "500"], capsys)[0] == 64
    assert run(["onepoint", "--output", str(tmp_path / "missing" / "x.csv")], capsys)[0] == 74
    # large E inside the disc lies outside what the finite-N contours handle
    code, out, _ = run(["onepoint", "--target", "finite-n", "--n", "4", "--lambda", "8", "--delta-t", "1",
                        "--eta-t", "0.5"], capsys)
    assert code == 2
    assert rows(out)[0]["converged"] == "false"


def test_config_precedence_per_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 5\nn = 6\nsamples = 1000\nkind = real\n")
    base = ["mc", "--config", str(cfg), "--sigma-dump", str(tmp_path / "s.csv"), "--output", str(tmp_path / "o.csv")]

    def dump():
        return (tmp_path / "s.csv").read_text()

    assert run(base, capsys)[0] == 0
    from_file = dump()
    assert run(base + ["--seed", "5"], capsys)[0] == 0
    assert dump() == from_file
    assert run(base + ["--seed", "6"], capsys)[0] == 0
    assert dump() != from_file
    # n from file overrides the default 256: values are sigma_min of 6 x 6 matrices
    assert len(from_file.splitlines()) == 1001
    cfg.write_text("unknown_key = 1\n")
    assert run(base, capsys)[0] == 64


def test_mc_is_byte_identical(capsys, tmp_path):
    args = ["mc", "--kind", "complex", "--n", "8", "--samples", "1200", "--seed", "7", "--hist", "true",
            "--resolvent", "true"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--output", str(a)], capsys)[0] == 0
    assert run(args + ["--output", str(b), "--threads", "2"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_mc_histogram_shape_and_svg(capsys, tmp_path):
    svg = tmp_path / "h.svg"
    code, out, _ = run(["mc", "--kind", "real", "--n", "6", "--samples", "1000", "--z", "0", "--hist", "true",
              "--svg", str(svg)],
                       capsys)
    assert code == 0
    assert len(rows(out)) == 80
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg") and root.get("version") == "1.1"
    assert root.findall("{http://www.w3.org/2000/svg}polyline")


def test_resolvent_csv_round_trip(capsys, tmp_path):
    path = tmp_path / "r.csv"
    assert run(["mc", "--n", "6", "--samples", "50", "--resolvent", "true", "--output", str(path)], capsys)[0] == 0
    from ginibre_sv.ginibre_mc import EnsembleSpec, resolvent_trace_mean
    r = resolvent_trace_mean(EnsembleSpec("complex", 6, 0j, 0, 50), 6 ** -1.5, 0.5 * 6 ** -1.5)
    (row,) = rows(path.read_text())
    assert complex(float(row["re_mean"]), float(row["im_mean"])) == r["mean"]


def test_validate_suites(capsys, tmp_path):
    rep = tmp_path / "rep.json"
    code, out, _ = run(["validate", "--suite", "identities,tau-collapse", "--report", str(rep)], capsys)
    assert code == 0
    assert out.startswith("PASS")
    assert rep.exists()
    assert run(["validate", "--suite", "monotone-ray"], capsys)[0] == 1
    assert run(["validate", "--suite", "nope"], capsys)[0] == 64


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("GINIBRE_THREADS", "0")
    assert run(["mc", "--n", "4", "--samples", "10", "--resolvent", "true"], capsys)[0] == 64
