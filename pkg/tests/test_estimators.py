import pytest
from sklearn.base import clone

from lnprivacy import PaymentDiscovery, PropertyHeuristic, generate_corpus
from lnprivacy.chain import OpeningRules


@pytest.mark.parametrize("est", [PaymentDiscovery(tau_s=4, coverage="oracle_aided", seed=3),
                                 PropertyHeuristic(window=(1, 2), opening_rules=OpeningRules())])
def test_params_round_trip(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    twin.set_params(**params)
    assert repr(twin) == repr(est)


def test_unfitted_clone_has_no_state():
    ds, truth = generate_corpus(300, 10, 8, 6, 3, seed=2, n_anonymous=1)
    est = PropertyHeuristic(window=truth.window).fit(ds)
    assert hasattr(est, "dataset_") and not hasattr(clone(est), "dataset_")
    labels = est.predict(list(ds))
    got = {t.txid for t, lab in zip(ds, labels) if lab == "open"}
    assert got == truth.private_opens | truth.public_opens
