import json
import textwrap

import pytest

from lnprivacy import ConfigError
from lnprivacy.cli import main
from lnprivacy.experiments import bundled_scenarios, load_config, run_scenario

TINY = """
[[scenario]]
name = "tiny"
seed = 3
runs = 2

[scenario.snapshot]
synthetic = {{ n_nodes = 40, mean_degree = 4.0, seed = 1 }}

[scenario.sim]
t_pay = 300
duration = 1
values = "fixed(1000, 10)"

[scenario.onpath]
[scenario.throughput]

[scenario.discovery]
taus = [2, 16]

[scenario.probe]
snapshots = 2
{extra}
"""


def _write(tmp_path, text, name="c.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


@pytest.fixture(scope="module")
def quickstart(tmp_path_factory):
    root = tmp_path_factory.mktemp("qs")
    assert main(["run", "quickstart", "--output-root", str(root)]) == 0
    return root / "quickstart"


def test_quickstart_outputs(quickstart):
    names = {p.name for p in quickstart.iterdir()}
    assert {"summary.json", "lengths.csv", "onpath.csv", "throughput.csv", "discovery.csv",
            "budget.csv", "cost.csv", "links.csv", "events_run0.csv"} <= names
    summary = json.loads((quickstart / "summary.json").read_text())
    m = summary["metrics"]
    assert set(m) >= {"onpath", "throughput", "discovery", "budget", "cost", "chain", "sim"}
    assert m["onpath"]["length_distribution"]["success"]
    assert "sender/success/lower_bound" in m["onpath"]["probabilities"]
    header = (quickstart / "discovery.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["tau_s", "precision", "recall", "ci_low", "ci_high"]


def test_list_and_validate_bundled(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("lengths_long", "lengths_short", "throughput_big", "throughput_small",
                 "discovery_tau_sweep", "recall_vs_budget", "attack_cost", "chain_corpus"):
        assert name in out
    for name in bundled_scenarios():
        assert main(["validate", name]) == 0


def test_bundled_settings():
    [long] = load_config(bundled_scenarios()["lengths_long"])
    [short] = load_config(bundled_scenarios()["lengths_short"])
    assert (long.sim.t_pay, long.sim.endpoints, long.sim.values) == (1000, "uniform", ("cheap",))
    assert (short.sim.endpoints, short.sim.values) == ("weighted", ("expensive",))
    [sweep] = load_config(bundled_scenarios()["discovery_tau_sweep"])
    assert sweep.sim.t_pay == 2000 and sweep.sim.values == ("fixed", 1000, 10)
    assert sweep.sections["discovery"]["taus"] == [2 ** j for j in range(9)]


def test_empty_scenario_list(tmp_path, capsys):
    path = _write(tmp_path, "# nothing here\n")
    root = tmp_path / "out"
    assert main(["run", str(path), "--output-root", str(root)]) == 0
    assert not root.exists() or not any(root.iterdir())
    assert main(["validate", str(path)]) == 0


@pytest.mark.parametrize("body, needle", [
    ("[[scenario]]\nname = 'x'\nbogus = 1\n", "scenario[0].bogus"),
    ("[[scenario]]\nname = 'x'\n[scenario.sim]\nt_pay = 0\n", "snapshot"),
    ("[[scenario]]\nname = 'x'\n[scenario.snapshot]\nsynthetic = {n_nodes = 5}\n"
     "[scenario.sim]\nt_pay = 0\n", "sim"),
    ("[[scenario]]\nname = 'x'\n[scenario.snapshot]\npath = 'missing.json'\n", "snapshot.path"),
    ("[[scenario]]\nname = = 'x'\n", "line 2"),
    ("[[scenario]]\nseed = 1\n", "name"),
])
def test_config_errors(tmp_path, capsys, body, needle):
    path = _write(tmp_path, body)
    assert main(["validate", str(path)]) == 1
    assert needle in capsys.readouterr().err
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "none.toml")]) == 1


def test_env_output_root(tmp_path, monkeypatch):
    path = _write(tmp_path, TINY.format(extra=""))
    monkeypatch.setenv("LNPRIVACY_OUTPUT_ROOT", str(tmp_path / "env"))
    assert main(["run", str(path)]) == 0
    assert (tmp_path / "env" / "tiny" / "summary.json").is_file()
    assert main(["run", str(path), "--output-root", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "tiny" / "summary.json").is_file()


def test_byte_identical_reruns(tmp_path):
    path = _write(tmp_path, TINY.format(extra=""))
    for root in ("a", "b"):
        assert main(["run", str(path), "--output-root", str(tmp_path / root)]) == 0
    files = sorted(p.name for p in (tmp_path / "a" / "tiny").iterdir())
    assert "events_run1.csv" in files
    for name in files:
        assert (tmp_path / "a" / "tiny" / name).read_bytes() == \
            (tmp_path / "b" / "tiny" / name).read_bytes(), name


def test_workers_do_not_change_results(tmp_path):
    [sc] = load_config(_write(tmp_path, TINY.format(extra="")))
    one = run_scenario(sc, tmp_path / "one", workers=1)
    two = run_scenario(sc, tmp_path / "two", workers=2)
    assert one["metrics"] == two["metrics"]


def test_mid_run_failure_manifest(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    path = _write(tmp_path, """
        [[scenario]]
        name = "broken"
        [scenario.snapshot]
        path = "broken.json"
        [scenario.sim]
        t_pay = 10
        """)
    root = tmp_path / "out"
    assert main(["run", str(path), "--output-root", str(root)]) == 2
    manifest = json.loads((root / "broken" / "errors.json").read_text())
    assert manifest["stage"] == "snapshot" and manifest["scenario"] == "broken"
    assert "errors.json" in capsys.readouterr().err


def test_partial_outputs_kept(tmp_path):
    path = _write(tmp_path, TINY.format(
        extra='[scenario.chain]\ndataset = "nope.jsonl"\npublic_channels = "pub.csv"\n'))
    with pytest.raises(ConfigError):
        load_config(path)
    (tmp_path / "nope.jsonl").write_text("{bad\n")
    (tmp_path / "pub.csv").write_text("open_txid,close_txid,node1,node2\n")
    root = tmp_path / "out"
    assert main(["run", str(path), "--output-root", str(root)]) == 2
    manifest = json.loads((root / "tiny" / "errors.json").read_text())
    assert manifest["stage"] == "chain"
    assert "lengths.csv" in manifest["outputs"]
    assert (root / "tiny" / "lengths.csv").is_file()


def test_generate_snapshot(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["generate-snapshot", "--nodes", "30", "--seed", "2", "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["nodes"] == 30
    path = _write(tmp_path, f"""
        [[scenario]]
        name = "fromfile"
        [scenario.snapshot]
        path = "{out.name}"
        [scenario.sim]
        t_pay = 50
        [scenario.onpath]
        """)
    assert main(["run", str(path), "--output-root", str(tmp_path / "o")]) == 0


def test_chain_from_files(tmp_path):
    import csv

    from lnprivacy import generate_corpus
    from lnprivacy.chain import write_jsonl

    ds, truth = generate_corpus(600, 20, 12, 10, 4, seed=3, n_anonymous=1)
    write_jsonl(ds, tmp_path / "txs.jsonl")
    with open(tmp_path / "pub.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["open_txid", "close_txid", "node1", "node2"])
        for txid, (a, b) in truth.public_endpoints.items():
            w.writerow([txid, "", a, b])
    path = _write(tmp_path, f"""
        [[scenario]]
        name = "files"
        [scenario.chain]
        dataset = "txs.jsonl"
        public_channels = "pub.csv"
        window = [{truth.window[0]}, {truth.window[1]}]
        """)
    assert main(["run", str(path), "--output-root", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "files" / "links.csv")))
    assert {r["open_txid"] for r in rows} == truth.private_opens
