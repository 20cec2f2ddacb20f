import numpy as np
import pytest

from ifs_lab.hyperbolicity import (
    diameter_profile,
    diameter_sensitivity,
    equivalence_check,
    hyperbolicity_verdict,
    n_for_eps,
    weak_star_probe,
)
from ifs_lab.ifs_core import BoxSpace, PolyAffineBox, blend, cantor, edalat, halving, identity, sierpinski
from ifs_lab.metric import BoxDomain, epsilon_net
from oracles import halving_diam

NET1 = epsilon_net(BoxDomain.unit(1), 1 / 16)


def test_halving_profile_closed_form():
    prof = diameter_profile(halving(), NET1, n_max=60)
    expected = np.array([halving_diam(n) for n in range(1, 61)])
    assert np.max(np.abs(prof.sup_diam - expected)) <= 1e-9
    assert prof.sup_diam[4] == 0.03125


def test_edalat_profile_closed_form():
    prof = diameter_profile(edalat(), NET1, n_max=60)
    expected = 1 / (1 + np.arange(1, 61))
    assert np.max(np.abs(prof.sup_diam - expected)) <= 1e-9
    assert prof.sup_diam[8] == pytest.approx(0.1, abs=1e-15)


def test_identity_profile_flat_and_counterexample():
    prof = diameter_profile(identity(), NET1, n_max=20)
    assert np.all(prof.sup_diam == 1.0)
    verdict = hyperbolicity_verdict(prof)
    assert verdict.verdict == "counterexample"
    assert verdict.witness is not None and len(verdict.witness) == 20


def test_verdicts():
    assert hyperbolicity_verdict(diameter_profile(halving(), NET1, n_max=30)).verdict == "weakly_hyperbolic_evidence"
    assert hyperbolicity_verdict(diameter_profile(edalat(), NET1, n_max=60)).verdict == "inconclusive"


@pytest.mark.parametrize("family", [cantor, sierpinski, blend, edalat])
def test_profile_monotone_on_each_word(family):
    f = family()
    net = epsilon_net(f.domain, float(f.domain.sides.max()) / 8)
    prof = diameter_profile(f, net, n_max=25, words=16, seed=2)
    assert np.all(np.diff(prof.sup_diam) <= 1e-12)


def test_profile_deterministic_in_seed():
    f = sierpinski()
    net = epsilon_net(f.domain, 0.25)
    a = diameter_profile(f, net, n_max=10, seed=5)
    b = diameter_profile(f, net, n_max=10, seed=5)
    assert np.array_equal(a.sup_diam, b.sup_diam)


def test_weak_star_probe_examples():
    probe = weak_star_probe(halving(), 1.0, [2.0**-k for k in range(1, 8)], n_max=20)
    assert [probe.n0_for(2.0**-k) for k in range(1, 8)] == list(range(1, 8))
    probe = weak_star_probe(identity(), 1.0, [0.5, 0.1], n_max=20)
    assert probe.n0 == [None, None]
    probe = weak_star_probe(edalat(), 1.0, [0.1], n_max=40)
    assert probe.n0[0] is not None and probe.n0[0] <= 10


@pytest.mark.parametrize("family,n_max", [(halving, 60), (cantor, 60), (edalat, 200), (blend, 60)])
def test_equivalence_agrees_on_hyperbolic(family, n_max):
    f = family()
    net = epsilon_net(f.domain, 1 / 16)
    rep = equivalence_check(diameter_profile(f, net, n_max=n_max), weak_star_probe(f, 1.0, [1e-2], n_max=n_max), 1e-2)
    assert rep.agree and rep.weak and rep.weak_star


def test_equivalence_agrees_on_identity():
    rep = equivalence_check(diameter_profile(identity(), NET1, n_max=40), weak_star_probe(identity(), 1.0, [1e-2], 40),
                            1e-2)
    assert rep.agree and not rep.weak and not rep.weak_star
    assert "agree" in rep.text()


def test_equivalence_flags_disagreement():
    prof = diameter_profile(halving(), NET1, n_max=5)
    probe = weak_star_probe(halving(), 1.0, [1e-2], n_max=20)
    rep = equivalence_check(prof, probe, 1e-2)
    assert not rep.agree and "DISAGREE" in rep.text()


def test_halving_reaches_1e3_by_n10():
    prof = diameter_profile(halving(), NET1, n_max=10)
    assert n_for_eps(prof, 1e-3) == 10


def test_diameter_modulus_shrinks_with_delta():
    # the contraction factor depends on lam, so image diameters do too
    f = PolyAffineBox([[{"1": 0.25, "l1": 0.25}]], [{"l1": 0.25}], BoxDomain.unit(1), BoxSpace([0.0], [1.0], 0.1))
    word = np.full((6, 1), 0.5)
    responses = [diameter_sensitivity(f, NET1, word, d, seed=0) for d in (0.1, 0.01, 0.001)]
    assert responses[0] > responses[1] > responses[2] >= 0
