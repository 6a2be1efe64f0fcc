import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lnprivacy import (Dataset, DatasetError, PropertyHeuristic, TransactionRecord,
                       classify_closing, classify_opening, cluster_and_identify, generate_corpus,
                       load_jsonl, match_open_close, trace_peeling_chains)
from lnprivacy.chain import (ClosingRules, OpeningRules, closing_violations, opening_violations,
                             write_jsonl, write_links)

W = (100, 200)


class Builder:
    """Tiny hand-written transaction graph with consistent spend links."""

    def __init__(self):
        self.txs = {}
        self.n = 0

    def add(self, name, height, inputs, outputs):
        ins = []
        for k, (src, cls, seq) in enumerate(inputs):
            if isinstance(src, tuple):
                prev, idx = src
                self.txs[prev]["outputs"][idx]["spent_by"] = [name, k]
                value = self.txs[prev]["outputs"][idx]["value_sat"]
            else:
                prev, idx, value = f"ext-{name}-{k}", 0, 1_000_000
            ins.append({"prev_txid": prev, "prev_index": idx, "script_class": cls,
                        "value_sat": value, "sequence": seq})
        outs = [{"index": i, "script_class": c, "value_sat": v, "spent_by": None,
                 **({"address": a} if a else {})} for i, (c, v, a) in enumerate(outputs)]
        self.txs[name] = {"txid": name, "block_height": height, "inputs": ins, "outputs": outs}
        return name

    def dataset(self):
        return Dataset(TransactionRecord.from_dict(d) for d in self.txs.values())


def _open(b, name, src, height=150, addr=None, value=1_000_000, change=True):
    outs = [("p2wsh", value, addr or f"a-{name}")]
    if change:
        outs.append(("other", 50_000, None))
    return b.add(name, height, [(src, "p2wpkh", 0xFFFFFFFF)], outs)


def _close(b, name, open_name, height=160, outs=(("other", 500_000), ("other", 400_000))):
    return b.add(name, height, [((open_name, 0), "p2wsh-multisig-2of2", 0xFFFFFFFE)],
                 [(c, v, None) for c, v in outs])


@pytest.fixture
def chain3():
    """o1 -> o2 -> o3 through change outputs, o2 closed by c2, plus an unrelated payment."""
    b = Builder()
    _open(b, "o1", None, 110)
    _open(b, "o2", ("o1", 1), 120)
    _open(b, "o3", ("o2", 1), 130)
    _close(b, "c2", "o2", 140)
    b.add("pay", 150, [(None, "p2wpkh", 0xFFFFFFFF)], [("other", 1, None)] * 3)
    return b.dataset()


def test_opening_rules(chain3):
    assert classify_opening(chain3["o1"], W, chain3)
    assert not classify_opening(chain3["pay"], W, chain3)
    b = Builder()
    b.add("three", 150, [(None, "p2wpkh", 1)], [("p2wsh", 10, None)] * 3)
    b.add("big", 150, [(None, "p2wpkh", 1)], [("p2wsh", 16_777_216, None)])
    b.add("late", 250, [(None, "p2wpkh", 1)], [("p2wsh", 10, None)])
    b.add("taproot", 150, [(None, "other", 1)], [("p2wsh", 10, None)])
    b.add("r1", 150, [(None, "p2sh", 1)], [("p2wsh", 10, "same")])
    b.add("r2", 150, [(None, "p2sh", 1)], [("p2wsh", 10, "same")])
    ds = b.dataset()
    assert opening_violations(ds["three"], W, ds) == ["max_outputs", "single_p2wsh"]
    assert opening_violations(ds["big"], W, ds) == ["max_value"]
    assert opening_violations(ds["late"], W, ds) == ["window"]
    assert opening_violations(ds["taproot"], W, ds) == ["input_class"]
    assert opening_violations(ds["r1"], W, ds) == ["unique_script"]
    assert classify_opening(ds["r1"], W)  # reuse is only visible with the dataset
    assert classify_opening(ds["late"], W, ds, OpeningRules(window=False))
    assert classify_opening(ds["big"], None, ds, OpeningRules(max_value=False))


def test_closing_rules(chain3):
    assert classify_closing(chain3["c2"])
    b = Builder()
    _open(b, "o", None)
    _open(b, "p", None)
    b.add("two", 160, [(("o", 0), "p2wsh-multisig-2of2", 5), (("p", 0), "p2wsh-multisig-2of2", 5)],
          [("other", 1, None)])
    _open(b, "q", None)
    b.add("zero", 160, [(("q", 0), "p2wsh-multisig-2of2", 0)], [("other", 1, None)])
    ds = b.dataset()
    assert closing_violations(ds["two"]) == ["single_input"]
    assert closing_violations(ds["zero"]) == ["nonzero_sequence"]
    assert closing_violations(ds["o"]) == ["multisig_input"]
    assert classify_closing(ds["zero"], ClosingRules(nonzero_sequence=False))


def test_match_open_close(chain3):
    links = match_open_close(chain3, W)
    assert [(l.open_txid, l.close_txid) for l in links] == [("o1", None), ("o2", "c2"), ("o3", None)]
    links = match_open_close(chain3, W, public_txids={"o2"})
    assert [l.open_txid for l in links] == ["o1", "o3"]
    assert all(l.close_txid != "c2" for l in match_open_close(chain3, W, public_txids={"c2"}))


def test_three_open_chain(chain3):
    res = trace_peeling_chains(chain3, ["o2"], W)
    assert res.chains == [["o1", "o2", "o3", "c2"]]
    assert res.new_opens == ["o1", "o3"]
    with pytest.raises(DatasetError):
        trace_peeling_chains(chain3, ["nope"], W)


def test_close_funds_new_open():
    b = Builder()
    _open(b, "o1", None, 110)
    _close(b, "c1", "o1", 120)
    _open(b, "o2", ("c1", 0), 130)
    res = trace_peeling_chains(b.dataset(), ["o1"], W)
    assert res.chains == [["o1", "c1", "o2"]]


def test_close_funding_two_opens_splits():
    b = Builder()
    _open(b, "o1", None, 110)
    _close(b, "c1", "o1", 120)
    _open(b, "x", ("c1", 0), 130)
    _open(b, "y", ("c1", 1), 130)
    res = trace_peeling_chains(b.dataset(), ["o1", "x", "y"], W)
    assert sorted(map(tuple, res.chains)) == [("o1", "c1"), ("x",), ("y",)]


def test_tracing_stops_at_non_channel_spend():
    b = Builder()
    _open(b, "o1", None, 110)
    b.add("mix", 115, [(("o1", 1), "p2wpkh", 1)] + [(None, "p2wpkh", 1)] * 2,
          [("other", 1, None)] * 3)
    _open(b, "o2", ("mix", 0), 120)
    res = trace_peeling_chains(b.dataset(), ["o1"], W)
    assert res.chains == [["o1"]]


def test_cluster_attribution():
    b = Builder()
    _open(b, "pa", None, 110)
    _open(b, "pb", ("pa", 1), 111)
    _open(b, "priv", ("pb", 1), 112)
    _close(b, "cpriv", "priv", 113, outs=(("other", 10),))
    _open(b, "qa", ("cpriv", 0), 114)  # a lone funding output stays with the opener
    _open(b, "z1", None, 120)
    _open(b, "z2", ("z1", 1), 121)
    ds = b.dataset()
    endpoints = {"pa": ("A", "B"), "pb": ("A", "C"), "z1": ("X", "Y"), "z2": ("Z", "W")}
    res = trace_peeling_chains(ds, ["pa", "z1"], W)
    att = cluster_and_identify(res, endpoints, ds, W)
    openers = {c.txids[0]: c.opener for c in att.clusters}
    assert openers == {"pa": "A", "z1": None}
    by_open = {l.open_txid: l for l in att.links}
    assert by_open["priv"].participants == ("A",) and not by_open["priv"].public
    assert by_open["pa"].participants == ("A", "B") and by_open["pa"].public
    assert att.counts() == {"both": 0, "one": 2, "none": 0}


def test_second_participant_via_closing():
    b = Builder()
    _open(b, "pa", None, 110)
    _open(b, "pa2", ("pa", 1), 111)
    _open(b, "priv", ("pa2", 1), 112)
    _close(b, "c", "priv", 113)  # two outputs: one per party
    _open(b, "mine", ("c", 0), 114)
    _open(b, "theirs", ("c", 1), 114)
    _open(b, "tb", ("theirs", 1), 115)
    ds = b.dataset()
    endpoints = {"pa": ("A", "B"), "pa2": ("A", "C"), "theirs": ("D", "E"), "tb": ("D", "F")}
    att = cluster_and_identify(trace_peeling_chains(ds, ["pa", "theirs", "mine"], W),
                               endpoints, ds, W)
    link = next(l for l in att.links if l.open_txid == "priv")
    assert set(link.participants) == {"A", "D"}


def test_dataset_consistency_checks(tmp_path):
    b = Builder()
    _open(b, "o", None)
    _close(b, "c", "o")
    bad = json.loads(json.dumps(b.txs))
    bad["o"]["outputs"][0]["spent_by"] = ["c", 3]
    with pytest.raises(DatasetError):
        Dataset(TransactionRecord.from_dict(d) for d in bad.values())
    with pytest.raises(DatasetError):
        TransactionRecord.from_dict({"txid": "x", "block_height": 1, "inputs": [],
                                     "outputs": [{"index": 0, "script_class": "p2tr",
                                                  "value_sat": 1}]})
    with pytest.raises(DatasetError):
        TransactionRecord.from_dict({"txid": "x"})
    path = tmp_path / "bad.jsonl"
    path.write_text("{oops\n")
    with pytest.raises(DatasetError):
        load_jsonl(path)


def test_jsonl_round_trip(tmp_path, chain3):
    write_jsonl(chain3, tmp_path / "d.jsonl")
    again = load_jsonl(tmp_path / "d.jsonl")
    assert {t.txid: t for t in again} == {t.txid: t for t in chain3}


def test_links_csv(tmp_path, chain3):
    att = cluster_and_identify(trace_peeling_chains(chain3, ["o1"], W), {"o1": ("A", "B")},
                               chain3, W)
    write_links(att.links, tmp_path / "l.csv")
    rows = list(csv.DictReader(open(tmp_path / "l.csv")))
    assert list(rows[0]) == ["open_txid", "close_txid", "cluster_id", "participant1",
                             "participant2"]
    assert {r["open_txid"] for r in rows} == {"o1", "o2", "o3"}


def test_property_heuristic_estimator(chain3):
    est = PropertyHeuristic(window=W).fit(chain3)
    labels = dict(zip([t.txid for t in chain3], est.predict(list(chain3))))
    assert labels == {"o1": "open", "o2": "open", "o3": "open", "c2": "close", "pay": "other"}
    with pytest.raises(DatasetError):
        PropertyHeuristic().predict(list(chain3))


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(n_transactions=1000, n_private=50, n_public=30, n_decoys=20,
                           n_chains=6, seed=5, n_anonymous=1)


def test_small_corpus_classification(corpus):
    ds, truth = corpus
    assert len(ds) == 1000
    opens = {t.txid for t in ds if classify_opening(t, truth.window, ds)}
    closes = {t.txid for t in ds if classify_closing(t)}
    assert opens == truth.private_opens | truth.public_opens
    assert closes == truth.closes | truth.public_closes
    for txid, (kind, rule) in truth.decoys.items():
        tx = ds[txid]
        if kind == "open":
            assert opening_violations(tx, truth.window, ds) == [rule]
        else:
            assert closing_violations(tx) == [rule]


def test_small_corpus_chains_and_exclusion(corpus):
    ds, truth = corpus
    links = match_open_close(ds, truth.window, truth.public_txids)
    assert {l.open_txid for l in links} == truth.private_opens
    assert not {l.open_txid for l in links} & truth.public_txids
    res = trace_peeling_chains(ds, sorted(truth.public_opens), truth.window)
    got = [set(c) for c in res.chains]
    assert sorted(map(sorted, got)) == sorted(map(sorted, truth.chains))
    seen = [t for c in res.chains for t in c]
    assert len(seen) == len(set(seen))
    att = cluster_and_identify(res, truth.public_endpoints, ds, truth.window)
    assert att.counts() == truth.expected_counts


def test_corpus_deterministic():
    a, _ = generate_corpus(300, 10, 8, 6, 3, seed=1, n_anonymous=1)
    b, _ = generate_corpus(300, 10, 8, 6, 3, seed=1, n_anonymous=1)
    assert [t.to_dict() for t in a] == [t.to_dict() for t in b]


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.integers(1, 30))
def test_stability_under_unrelated_transactions(seed, extra):
    ds, truth = generate_corpus(400, 12, 8, 6, 4, seed=seed % 1000, n_anonymous=1)
    seeds = sorted(truth.public_opens)
    before = trace_peeling_chains(ds, seeds, truth.window).chains
    more = list(ds)
    for k in range(extra):
        more.append(TransactionRecord.from_dict({
            "txid": f"noise{k}", "block_height": 150_000 + k,
            "inputs": [{"prev_txid": f"far{k}", "prev_index": 0, "script_class": "p2wpkh",
                        "value_sat": 5, "sequence": 1}],
            "outputs": [{"index": 0, "script_class": "p2wsh", "value_sat": 5}]}))
    assert trace_peeling_chains(Dataset(more), seeds, truth.window).chains == before
