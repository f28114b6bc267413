import json

import pytest

from homorewire.cli import main

SPEC = {"n_guests": 120, "n_hosts": 20, "seed": 4, "age": {"mean": 35, "sd": 8},
        "group_shares": {"gender": {"F": 0.5, "M": 0.5},
                         "race": {"White": 0.6, "Asian": 0.3, "Black": 0.1}},
        "bias": 1.0}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    (d / "spec.json").write_text(json.dumps(SPEC))
    assert main(["synth", "--spec", str(d / "spec.json"), "--out", str(d)]) == 0
    return d


def run_analyze(dataset, out, *extra):
    return main(["analyze", "--nodes", str(dataset / "nodes.csv"), "--edges",
                 str(dataset / "edges.csv"), "--configs", "60", "--seed", "5",
                 "--out", str(out), *extra])


def test_validate_clean(dataset, capsys):
    assert main(["validate", "--nodes", str(dataset / "nodes.csv"),
                 "--edges", str(dataset / "edges.csv")]) == 0
    assert "0 rejected" in capsys.readouterr().out


def test_validate_findings_and_parse_errors(tmp_path, dataset):
    edges = (dataset / "edges.csv").read_text().splitlines()
    (tmp_path / "e.csv").write_text("\n".join(edges + ["g000,nohost,1,Synthville,full"]) + "\n")
    assert main(["validate", "--nodes", str(dataset / "nodes.csv"),
                 "--edges", str(tmp_path / "e.csv"), "--out", str(tmp_path / "v.json")]) == 1
    report = json.loads((tmp_path / "v.json").read_text())
    assert [f["kind"] for f in report["findings"]] == ["ReferentialError"]
    (tmp_path / "bad.csv").write_text("guest_id\n")
    assert main(["validate", "--nodes", str(dataset / "nodes.csv"),
                 "--edges", str(tmp_path / "bad.csv")]) == 2


def test_usage_errors(dataset, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["analyze", "--no-such-flag"])
    assert info.value.code == 2
    assert run_analyze(dataset, tmp_path, "--attribute", "height") == 2
    assert main(["analyze", "--nodes", str(tmp_path / "none.csv"),
                 "--edges", str(tmp_path / "none.csv")]) == 2


def test_analyze_is_byte_identical_across_jobs(dataset, tmp_path):
    a, b = tmp_path / "out", tmp_path / "out2"
    assert run_analyze(dataset, a, "--jobs", "1") == 0
    first = {p.name: p.read_bytes() for p in a.iterdir()}
    a.rename(b)
    assert run_analyze(dataset, a, "--jobs", "3") == 0
    second = {p.name: p.read_bytes() for p in a.iterdir()}
    assert first == second
    names = set(first)
    assert {"Synthville__full__gender.json", "Synthville__full__race.md",
            "summary.md", "counts.md", "run.json"} <= names
    rep = json.loads(first["Synthville__full__gender.json"])
    assert rep["manifest"]["seed"] == 5 and rep["tool"]["name"] == "homorewire"
    assert rep["metadata"]["n_configs"] == 60


def test_manifest_overrides_flags(dataset, tmp_path):
    manifest = {"nodes": str(dataset / "nodes.csv"), "edges": str(dataset / "edges.csv"),
                "attributes": ["gender"], "n_configs": 30, "formats": ["csv"],
                "out": str(tmp_path / "m")}
    (tmp_path / "run.json").write_text(json.dumps(manifest))
    assert main(["analyze", "--manifest", str(tmp_path / "run.json"), "--configs", "999"]) == 0
    files = sorted(p.name for p in (tmp_path / "m").iterdir())
    assert files == ["Synthville__full__gender.csv", "run.json"]
    run = json.loads((tmp_path / "m" / "run.json").read_text())
    assert run["manifest"]["n_configs"] == 30


def test_domain_error_exits_one(tmp_path):
    (tmp_path / "n.csv").write_text(
        "node_id,side,city,gender,gender_conf,race,race_conf,age_years,age_conf,"
        "num_properties,weekly_price\n"
        "g1,guest,X,F,1,,,,,,\ng2,guest,X,M,1,,,,,,\nh1,host,X,F,1,,,,,1,10\n")
    (tmp_path / "e.csv").write_text("guest_id,host_id,weight,city,property_type\n"
                                    "g1,h1,2,X,full\ng2,h1,1,X,full\n")
    code = main(["analyze", "--nodes", str(tmp_path / "n.csv"), "--edges", str(tmp_path / "e.csv"),
                 "--attribute", "gender", "--out", str(tmp_path / "o")])
    assert code == 1
    run = json.loads((tmp_path / "o" / "run.json").read_text())
    assert run["errors"][0]["error"] == "NotRewirable"


@pytest.mark.parametrize("procedure", ["confidence", "perturb", "tercile", "matchpair"])
def test_robustness_procedures(dataset, tmp_path, procedure):
    code = main(["robustness", "--procedure", procedure, "--nodes", str(dataset / "nodes.csv"),
                 "--edges", str(dataset / "edges.csv"), "--configs", "30", "--attribute", "race",
                 "--caliper", "1.0", "--out", str(tmp_path)])
    assert code == 0
    if procedure == "perturb":
        log = json.loads((tmp_path / "perturb_log.json").read_text())
        (entry,) = log.values()
        n_white = 0.6 * (SPEC["n_guests"] + SPEC["n_hosts"])
        assert entry["relabeled"] <= int(0.05 * n_white + 0.5)
    if procedure == "matchpair":
        assert (tmp_path / "matchpair.md").read_text().startswith("| City | Property |")
    else:
        assert (tmp_path / "delta.md").exists()


def test_report_command(dataset, tmp_path):
    assert run_analyze(dataset, tmp_path / "a", "--format", "json") == 0
    assert main(["report", str(tmp_path / "a"), "--out", str(tmp_path / "r.md")]) == 0
    text = (tmp_path / "r.md").read_text()
    assert "| Slice | FF | FM | MF | MM |" in text and "| Synthville (Full) | White |" in text
    assert main(["report", str(tmp_path / "r.md")]) == 2
