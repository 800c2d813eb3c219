import json
import random
from fractions import Fraction

import pytest

from profinite_fa.congruence import (
    FiniteMatrix,
    Fingerprint,
    ModulusNotCoprime,
    SMatrix,
    compare_fingerprints,
    delta_generators,
    fingerprint,
    in_principal_congruence,
    reduce_mod,
    sl4_order,
    stab_chain_order,
)
from oracles import closure_size, int_det


def ident(n=4):
    return tuple(int(r == c) for r in range(n) for c in range(n))


def test_reduce_mod_examples():
    assert reduce_mod(SMatrix.identity(7), 6).entries == ident()
    e = reduce_mod(SMatrix.elementary(7, 0, 1, Fraction(1, 7)), 2)
    assert e.entries == reduce_mod(SMatrix.elementary(7, 0, 1, 1), 2).entries
    e = reduce_mod(SMatrix.elementary(3, 0, 1, Fraction(1, 3)), 5)
    assert e.entries[1] == 2


def test_reduce_mod_requires_coprime_level():
    with pytest.raises(ModulusNotCoprime):
        reduce_mod(SMatrix.identity(3), 6)


def test_smatrix_validation():
    with pytest.raises(ValueError):
        SMatrix.elementary(3, 0, 1, Fraction(1, 2))
    with pytest.raises(ValueError):
        SMatrix(3, (2,) + ident()[1:])


def test_principal_congruence():
    assert in_principal_congruence(SMatrix.identity(5), 7)
    assert in_principal_congruence(SMatrix.elementary(5, 0, 1, 3), 3)
    assert not in_principal_congruence(SMatrix.elementary(5, 0, 1, 1), 2)


def test_delta_generators():
    gens = delta_generators(5)
    assert len(gens) == 24
    for g in gens:
        scaled = [[int(x * 5) for x in g.entries[4 * r:4 * r + 4]] for r in range(4)]
        assert int_det(scaled) == 5**4


def random_word(gens, rng, length=6):
    out = SMatrix.identity(gens[0].p)
    for _ in range(length):
        out = out * rng.choice(gens)
    return out


def test_reduce_mod_is_homomorphism_and_crt_consistent():
    rng = random.Random(10)
    gens = delta_generators(7)
    for _ in range(100):
        M, N = random_word(gens, rng), random_word(gens, rng)
        for n in (2, 3, 5, 6, 10):
            assert reduce_mod(M * N, n).entries == (reduce_mod(M, n) * reduce_mod(N, n)).entries
        big = reduce_mod(M, 15)
        assert big.reduce(3).entries == reduce_mod(M, 3).entries
        assert big.reduce(5).entries == reduce_mod(M, 5).entries


def test_sl4_order_values():
    assert sl4_order(2) == 20160 == 15 * 14 * 12 * 8
    assert sl4_order(3) == 729 * 8 * 26 * 80
    gl5 = (5**4 - 1) * (5**4 - 5) * (5**4 - 25) * (5**4 - 125)
    assert sl4_order(5) == gl5 // 4


def test_stab_chain_small_cases():
    assert stab_chain_order([FiniteMatrix(3, ident())], 3)[0] == 1
    t = list(ident())
    t[1] = 1
    order, chain = stab_chain_order([FiniteMatrix(3, t)], 3)
    assert order == 3 and chain.verify()


def test_delta_mod_two_is_everything():
    order, chain = stab_chain_order([reduce_mod(g, 2) for g in delta_generators(7)], 2)
    assert order == 20160
    assert chain.verify()


def random_sl2(l, rng):
    while True:
        m = tuple(rng.randrange(l) for _ in range(4))
        if (m[0] * m[3] - m[1] * m[2]) % l == 1:
            return m


@pytest.mark.parametrize("l", [3, 5])
def test_stab_chain_against_closure(l):
    rng = random.Random(l)
    for _ in range(25):
        gens = [random_sl2(l, rng) for _ in range(rng.choice([1, 2]))]
        order, chain = stab_chain_order(gens, l, dim=2)
        assert order == closure_size(gens, l, 2)
        assert all(chain.contains(g) for g in gens)


def test_fingerprint_examples():
    fd, fg = fingerprint("Delta", 7, 2), fingerprint("Gamma", 7, 2)
    assert fd.order == fg.order == 20160
    rep = compare_fingerprints(fd, fg)
    assert rep.passed
    js = json.loads(json.dumps(fd.to_json()))
    assert js["order"] == "20160" and js["side"] == "Delta" and len(js["generators"]) == 24


def test_compare_detects_small_image():
    full = fingerprint("Delta", 7, 2)
    tiny = Fingerprint(2, "Gamma", 7, [FiniteMatrix(2, ident())], 1)
    assert not compare_fingerprints(full, tiny).passed


def test_fingerprint_rejects_bad_input():
    with pytest.raises(ModulusNotCoprime):
        fingerprint("Delta", 3, 3)
    with pytest.raises(ValueError):
        fingerprint("Sigma", 3, 2)
    with pytest.raises(AssertionError):
        Fingerprint(2, "Delta", 3, [], 11)


def test_finite_matrix_checks_det():
    with pytest.raises(ValueError):
        FiniteMatrix(5, (2,) + ident()[1:])
