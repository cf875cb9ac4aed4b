import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genenet.challenge import (ALIEN, INCONCLUSIVE, RELATIVE, Challenge, ChallengeResponse, HashFunction,
                               PosteriorModel, agreement_region, issue_challenge, posterior_orders,
                               prefix_count, respond, search_space_size, tuple_digest, verdict, work_ratio)

THIRD = PosteriorModel(Fraction(1, 3), 26)


def test_model_constants():
    assert THIRD.q == Fraction(2, 75)
    assert THIRD.p + 25 * THIRD.q == 1
    with pytest.raises(ValueError):
        PosteriorModel(1.2)
    with pytest.raises(ValueError):
        PosteriorModel(0.5, 1)


def test_hash_function():
    h = HashFunction()
    assert h.digest_length == 32 and len(h.digest(b"x")) == 32
    with pytest.raises(ValueError):
        HashFunction("nope")


# -- issuing -----------------------------------------------------------------

def test_issue_without_decoys(rng):
    g = rng.integers(0, 26, 50)
    ch = issue_challenge(g, [3, 7, 9], 0, rng=rng)
    assert len(ch.digests) == 1 and ch.true_index == 0
    assert ch.digests[0] == tuple_digest(ch.salt, g[[3, 7, 9]])


def test_issue_with_decoys(rng):
    g = rng.integers(0, 26, 50)
    for _ in range(30):
        ch = issue_challenge(g, [1, 2], 20, rng=rng)
        assert len(set(ch.digests)) == 21
        assert ch.digests[ch.true_index] == tuple_digest(ch.salt, g[[1, 2]])
        others = [d for k, d in enumerate(ch.digests) if k != ch.true_index]
        # no decoy hashes the true tuple
        assert tuple_digest(ch.salt, g[[1, 2]]) not in others
    positions = [issue_challenge(g, [1, 2], 5, rng=rng).true_index for _ in range(600)]
    assert set(positions) == set(range(6))


@pytest.mark.parametrize("indices,decoys", [([1, 1], 0), ([], 0), ([60], 0), ([0], -1), ([0], 26)])
def test_issue_rejects(indices, decoys, rng):
    with pytest.raises(ValueError):
        issue_challenge(rng.integers(0, 26, 50), indices, decoys, rng=rng)


def test_two_element_space_size():
    assert len(list(posterior_orders((0, 0), THIRD))) == 676


# -- enumeration -------------------------------------------------------------

def test_first_candidate_is_own():
    assert next(posterior_orders((4, 1, 7), THIRD)) == (4, 1, 7)


def test_two_element_facts():
    own = (0, 0)
    order = list(posterior_orders(own, THIRD))
    probs = [THIRD.tuple_probability(own, t) for t in order]
    agreeing = [t for t in order if t[0] == 0 or t[1] == 0]
    assert len(agreeing) == 51
    assert sum(THIRD.tuple_probability(own, t) for t in agreeing) == Fraction(5, 9)
    assert float(Fraction(5, 9)) == pytest.approx(0.5556, abs=1e-4)
    assert agreement_region(2, THIRD) == (51, Fraction(5, 9))
    cum, prefix = Fraction(0), 0
    for p in probs:
        cum += p
        prefix += 1
        if cum >= Fraction(1, 2):
            break
    assert prefix == 45 == prefix_count(2, THIRD, Fraction(1, 2))


def exhaustive_check(own, model):
    I, m = model.alphabet_size, len(own)
    seen = set()
    p, q = float(model.p), float(model.q)
    mass = []
    order = {k: r for r, k in enumerate(sorted(range(m + 1), key=lambda k: -(p ** (m - k) * q**k)))}
    last_tier = -1
    for t in posterior_orders(own, model):
        k = sum(a != b for a, b in zip(own, t))
        assert order[k] >= last_tier
        last_tier = order[k]
        seen.add(t)
        mass.append(p ** (m - k) * q**k)
    assert len(seen) == len(mass) == I**m
    assert math.fsum(mass) == pytest.approx(1, abs=1e-9)
    assert all(a >= b * (1 - 1e-12) for a, b in zip(mass, mass[1:]))


@pytest.mark.parametrize("own", [(0,), (25,), (3, 3), (0, 25, 12), (1, 2, 3, 4)])
def test_enumeration_exhaustive_full_alphabet(own):
    exhaustive_check(own, THIRD)


@settings(max_examples=30)
@given(st.integers(2, 7), st.integers(1, 4), st.data())
def test_enumeration_exhaustive_small_alphabets(I, m, data):
    own = tuple(data.draw(st.lists(st.integers(0, I - 1), min_size=m, max_size=m)))
    p = data.draw(st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(1, I), Fraction(1, 10), Fraction(9, 10)]))
    exhaustive_check(own, PosteriorModel(p, I))


def test_within_tier_is_lexicographic():
    own = (1, 2, 0)
    model = PosteriorModel(Fraction(1, 2), 4)
    order = list(posterior_orders(own, model))
    tiers = {}
    for t in order:
        tiers.setdefault(sum(a != b for a, b in zip(own, t)), []).append(t)
    assert all(v == sorted(v) for v in tiers.values())


def test_uniform_posterior_every_tuple_equal():
    for I, m in [(26, 2), (26, 3), (5, 4)]:
        model = PosteriorModel(Fraction(1, I), I)
        own = (0,) * m
        assert {model.tuple_probability(own, t) for t in product(range(I), repeat=m)} == {Fraction(1, I**m)}


def test_posterior_normalization_exact():
    for I, m in [(26, 2), (4, 4), (6, 3)]:
        model = PosteriorModel(Fraction(2, 7), I)
        own = (1,) * m
        assert sum(model.tuple_probability(own, t) for t in product(range(I), repeat=m)) == 1


# -- responding --------------------------------------------------------------

def test_identical_prover_hits_first(rng):
    g = rng.integers(0, 26, 100)
    ch = issue_challenge(g, [5, 6, 7, 8], 10, rng=rng)
    r = respond(g, ch.public(), THIRD, budget=10)
    assert r.candidates_tested == 1 and r.chosen_digest_index == ch.true_index
    assert verdict(r, ch, 1) == RELATIVE


def test_work_equals_enumeration_position(rng):
    prover, verifier = rng.integers(0, 26, 30), rng.integers(0, 26, 30)
    idx = [2, 9, 17]
    ch = issue_challenge(verifier, idx, 0, rng=rng)
    order = list(posterior_orders(prover[idx], THIRD))
    r = respond(prover, ch, THIRD, budget=26**3)
    assert r.candidates_tested == order.index(tuple(verifier[idx])) + 1
    assert len(set(order[: r.candidates_tested])) == r.candidates_tested


def test_budget_exhaustion(rng):
    prover = np.zeros(10, dtype=int)
    verifier = np.full(10, 25)
    ch = issue_challenge(verifier, [0, 1, 2], 0, rng=rng)
    r = respond(prover, ch, THIRD, budget=5)
    assert r.chosen_digest_index is None and r.candidates_tested == 5
    assert verdict(r, ch, 100) == ALIEN
    with pytest.raises(ValueError):
        respond(prover, ch, THIRD, budget=0)


def test_unrelated_prover_work_near_half_space():
    rng = np.random.default_rng(41)
    space = 26**4
    works = []
    for _ in range(20):
        a, b = rng.integers(0, 26, 100), rng.integers(0, 26, 100)
        ch = issue_challenge(a, rng.choice(100, 4, replace=False), 0, rng=rng)
        works.append(respond(b, ch, THIRD, budget=space).candidates_tested)
    sd = space / math.sqrt(12)
    assert abs(np.mean(works) - space / 2) < 3 * sd / math.sqrt(20)


def test_verdict_rules():
    ch = Challenge((0,), (b"a", b"b"), b"", true_index=1)
    assert verdict(ChallengeResponse(1, 1), ch, 10) == RELATIVE
    assert verdict(ChallengeResponse(0, 1), ch, 10) == ALIEN
    assert verdict(ChallengeResponse(1, 11), ch, 10) == INCONCLUSIVE
    assert verdict(ChallengeResponse(None, 11), ch, 10) == ALIEN
    with pytest.raises(ValueError):
        verdict(ChallengeResponse(1, 1), ch.public(), 10)


def test_serialization(rng):
    ch = issue_challenge(rng.integers(0, 26, 40), [1, 5], 3, rng=rng)
    back = Challenge.from_json(ch.to_json())
    assert back == ch and back.true_index is None
    assert "true" not in ch.to_json()
    r = ChallengeResponse(2, 17, 0.25)
    assert ChallengeResponse.from_json(r.to_json()) == r
    assert "elapsed_ms" not in r.to_json(include_timing=False)


# -- combinatorics -----------------------------------------------------------

def test_search_space_examples():
    assert search_space_size(10, 10, 26) == 1
    assert search_space_size(10, 3, 26) == math.comb(10, 3) * 25**7 == 732_421_875_000
    with pytest.raises(ValueError):
        search_space_size(10, 11, 26)
    with pytest.raises(ValueError):
        search_space_size(10, 3, 1)


@pytest.mark.parametrize("I", [4, 26, 1024])
def test_search_space_partition(I):
    for n in range(0, 13):
        assert sum(search_space_size(n, k, I) for k in range(n + 1)) == I**n


def brute_prefix(n, model, target):
    own = (0,) * n
    probs = sorted((model.tuple_probability(own, t) for t in product(range(model.alphabet_size), repeat=n)),
                   reverse=True)
    cum = Fraction(0)
    for count, p in enumerate(probs, 1):
        cum += p
        if cum >= target:
            return count


@settings(max_examples=40)
@given(st.integers(1, 4), st.integers(2, 5), st.fractions(0, 1), st.fractions(Fraction(1, 100), Fraction(99, 100)))
def test_prefix_count_matches_brute_force(n, I, p, target):
    model = PosteriorModel(p, I)
    assert prefix_count(n, model, target) == brute_prefix(n, model, target)


def test_work_ratio_examples():
    assert work_ratio(10, PosteriorModel(Fraction(1, 26), 26), Fraction(1, 2)).ratio == 1
    r = work_ratio(10, THIRD, Fraction(1, 2))
    assert r.uniform_count == 26**10 // 2
    assert 100 < float(r) < 10_000
    big = work_ratio(10, PosteriorModel(Fraction(1, 3), 1024), Fraction(1, 2))
    assert float(big) > 1e6
    with pytest.raises(ValueError):
        work_ratio(10, THIRD, 1)


@pytest.mark.parametrize("n,I", [(3, 4), (6, 26), (10, 26)])
def test_work_ratio_monotone_in_match_probability(n, I):
    grid = [Fraction(1, I)] + [Fraction(k, 20) for k in range(1, 20) if Fraction(k, 20) > Fraction(1, I)]
    ratios = [work_ratio(n, PosteriorModel(p, I), Fraction(1, 2)).ratio for p in grid]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
