import itertools
import json
import random
import re

from fractions import Fraction

import pytest

from profinite_fa.exactnum import PrecisionExhausted
from profinite_fa.localtree import BudgetExceeded, DivisionLocal, LatticeTree, witness_hyperbolic
from profinite_fa.quatalg import Mat2Quat, choose_algebra, gamma_generators, maximal_order


@pytest.fixture(scope="module")
def div3():
    A = choose_algebra(3)
    O = maximal_order(A)
    tree = LatticeTree.division(A, precision=24)
    return A, O, tree, tree.build_ball(tree.base_vertex(), 2)


def test_alpha_examples():
    R = DivisionLocal(choose_algebra(3))
    assert R.alpha(R.one) == 0
    assert R.alpha(R.pi) == 1
    assert R.alpha(R.from_coords((3, 0, 0, 0))) == 2


def test_alpha_additive_and_order_membership():
    rng = random.Random(7)
    for p in (3, 5, 7):
        R = DivisionLocal(choose_algebra(p), 16)
        for _ in range(100):
            xs = [R.from_coords([rng.randint(-50, 50) * Fraction(p) ** rng.randint(-1, 2) for _ in range(4)]) for _ in range(2)]
            if any(x.is_zero() for x in xs):
                continue
            x, y = xs
            assert R.alpha(x * y) == R.alpha(x) + R.alpha(y)
            integral = all(c.is_exact_zero or c.valuation >= 0 for c in x.coeffs)
            assert integral == (R.alpha(x) >= 0)


def test_inverse_round_trip():
    R = DivisionLocal(choose_algebra(5), 16)
    x = R.from_coords((1, 2, 5, 7))
    one = x * R.inverse(x)
    assert R.reduce_mod_pi(one - R.one, 20)[1] == ()


def residue_field(R):
    """Brute-force O_p / pi O_p: reps keyed by reduction, with its own multiplication table."""
    p = R.p
    reps = {}
    for c in itertools.product(range(p), repeat=4):
        x = R.from_coords(c)
        _, key = R.reduce_mod_pi(x, 1)
        reps.setdefault(key, x)
    keys = sorted(reps)

    def mul(k1, k2):
        return R.reduce_mod_pi(reps[k1] * reps[k2], 1)[1]

    return keys, mul


@pytest.mark.parametrize("p", [3, 5])
def test_neighbor_count_is_number_of_residue_lines(p):
    R = DivisionLocal(choose_algebra(p), 16)
    keys, mul = residue_field(R)
    assert len(keys) == p * p
    zero = ()
    units = [k for k in keys if k != zero]
    # every nonzero residue has an inverse: the residue ring is a field
    one = R.reduce_mod_pi(R.one, 1)[1]
    assert all(any(mul(u, w) == one for w in units) for u in units)
    # lines of the 2-dimensional module: orbits of nonzero vectors under left scaling by units
    seen, lines = set(), 0
    for vec in itertools.product(keys, repeat=2):
        if vec == (zero, zero) or vec in seen:
            continue
        lines += 1
        for u in units:
            seen.add((mul(u, vec[0]), mul(u, vec[1])))
    tree = LatticeTree(R)
    assert len(tree.neighbors(tree.base_vertex())) == lines == p * p + 1


@pytest.mark.parametrize("p", [3, 5, 7])
def test_split_neighbors_and_spheres(p):
    tree = LatticeTree.split(p, 16)
    ball = tree.build_ball(tree.base_vertex(), 2)
    assert ball.degree == p + 1
    assert ball.spheres == [1, p + 1, (p + 1) * p]


def test_neighbors_are_at_distance_one(div3):
    _, _, tree, _ = div3
    v = tree.base_vertex()
    ns = tree.neighbors(v)
    assert v not in ns
    assert len({w.key for w in ns}) == len(ns)
    assert all(tree.distance(v, w) == 1 for w in ns)
    assert all(tree.distance(u, w) == 2 for u, w in itertools.combinations(ns, 2))


def test_division_ball_shape(div3):
    _, _, _, ball = div3
    d = ball.degree
    assert ball.spheres == [1, d, d * (d - 1)]
    assert ball.check()


def test_sphere_parametrization_matches_ball(div3):
    _, _, tree, ball = div3
    assert {v.key for v in tree.ball_vertices(2)} == {v.key for v in ball.vertices}


def test_radius_zero():
    tree = LatticeTree.split(3, 16)
    ball = tree.build_ball(tree.base_vertex(), 0)
    assert ball.spheres == [1] and ball.edges == []


def test_budget_exceeded():
    tree = LatticeTree.division(choose_algebra(5), 16, budget=100)
    with pytest.raises(BudgetExceeded):
        tree.build_ball(tree.base_vertex(), 2)


def test_canonical_form_idempotent_and_homothety_invariant(div3):
    _, _, tree, ball = div3
    R = tree.ring
    p_scalar = R.from_coords((3, 0, 0, 0))
    for v in ball.vertices[:40]:
        assert tree.canonicalize(v.basis) == v
        # homothety is left scaling (it commutes with the right matrix action)
        assert tree.canonicalize([(R.pi * x, R.pi * y) for x, y in v.basis]) == v
        assert tree.canonicalize([(p_scalar * x, p_scalar * y) for x, y in v.basis]) == v


def test_distance_examples(div3):
    _, _, tree, _ = div3
    R = tree.ring
    u = tree.base_vertex()
    v1 = tree.canonicalize([(R.pi, R.zero), (R.zero, R.one)])
    v2 = tree.canonicalize([(R.pi, R.zero), (R.zero, R.pi_power(-1))])
    assert tree.distance(u, u) == 0
    assert tree.distance(u, v1) == 1
    assert tree.distance(u, v2) == 2


def test_metric_axioms_and_bfs(div3):
    _, _, tree, ball = div3
    rng = random.Random(8)
    V = ball.vertices
    bfs0 = ball.bfs_distances(0)
    assert [tree.distance(V[0], v) for v in V] == bfs0
    for src in rng.sample(range(len(V)), 5):
        bfs = ball.bfs_distances(src)
        for t in rng.sample(range(len(V)), 20):
            assert tree.distance(V[src], V[t]) == bfs[t]
    for _ in range(200):
        x, y, z = (rng.choice(V) for _ in range(3))
        dxy = tree.distance(x, y)
        assert dxy == tree.distance(y, x)
        assert tree.distance(x, z) <= dxy + tree.distance(y, z)


def test_action_is_by_automorphisms(div3):
    A, O, tree, ball = div3
    V = ball.vertices
    rng = random.Random(9)
    for g in gamma_generators(A, O):
        emb = tree.embed_matrix(g)
        img = [tree.act(g, v, emb) for v in V]
        for i, j in ball.edges:
            assert tree.distance(img[i], img[j]) == 1
        for _ in range(50):
            i, j = rng.randrange(len(V)), rng.randrange(len(V))
            assert tree.distance(img[i], img[j]) == tree.distance(V[i], V[j])


def test_identity_and_unipotents_fix_base_vertex(div3):
    A, O, tree, ball = div3
    v0 = tree.base_vertex()
    for v in ball.vertices[:20]:
        assert tree.act(Mat2Quat.identity(A), v) == v
    for g in gamma_generators(A, O)[:8]:
        assert tree.act(g, v0) == v0


def test_foreign_algebra_rejected(div3):
    _, _, tree, _ = div3
    B = choose_algebra(5)
    with pytest.raises(ValueError):
        tree.embed_matrix(Mat2Quat.identity(B))


def test_witness_p3():
    A = choose_algebra(3)
    rep = witness_hyperbolic(A, maximal_order(A))
    assert rep.translation_length == 2
    assert rep.min_displacement == 2
    assert rep.orbit_distances == [2, 4, 6, 8]
    assert rep.passed
    js = json.loads(json.dumps(rep.to_json()))
    assert js["translation_length"] == 2 and js["denominator_exponent"] == 1


def test_json_and_dot_export(div3):
    _, _, _, ball = div3
    js = json.loads(json.dumps(ball.to_json()))
    assert {"center", "radius", "degree", "spheres", "edges"} <= set(js)
    assert all(len(e) == 2 for e in js["edges"])
    dot = ball.to_dot()
    assert dot.startswith("graph tree {")
    assert len(re.findall(r'^\s+\d+ \[label="[0-9a-f]{10}"\];$', dot, re.M)) == len(ball.vertices)
    assert len(re.findall(r"^\s+\d+ -- \d+;$", dot, re.M)) == len(ball.edges)


def test_low_precision_is_reported():
    tree = LatticeTree.division(choose_algebra(3), precision=3)
    with pytest.raises(PrecisionExhausted):
        tree.build_ball(tree.base_vertex(), 4)
