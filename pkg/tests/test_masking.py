from itertools import combinations

import numpy as np
import pytest
from scipy import stats

from secaggsim.errors import DimensionMismatch, InvalidPublicKey
from secaggsim.field import FieldPrime, add_mod
from secaggsim.masking import (
    DH_GROUP_2048,
    DH_GROUP_TEST,
    DhParams,
    LweMatrixOps,
    LweParams,
    TAG_MATRIX,
    TAG_PAIRWISE,
    dh_agree,
    dh_keygen,
    gaussian_error,
    lwe_mask,
    lwe_matrix,
    mat_vec_mod,
    stream_expand,
)

F17 = FieldPrime(17)
M61F = FieldPrime()


def rng(seed=0):
    return np.random.default_rng(seed)


# --- Diffie-Hellman ---------------------------------------------------------


def test_generator_as_public_key():
    # sk = 1 must yield pk = g; force it via a degenerate "rng" that
    # always produces 1 after the keygen's excess-bit shift
    order_bits = DH_GROUP_TEST.subgroup_order.bit_length()

    class One:
        def bytes(self, n):
            return (1 << (8 * n - order_bits)).to_bytes(n, "big")

    kp = dh_keygen(DH_GROUP_TEST, One())
    assert kp.sk == 1 and kp.pk == DH_GROUP_TEST.g


def test_test_group_subgroup_membership():
    p, order = DH_GROUP_TEST.p, DH_GROUP_TEST.subgroup_order
    for seed in range(40):
        kp = dh_keygen(DH_GROUP_TEST, rng(seed))
        assert pow(kp.pk, order, p) == 1


def test_keygen_determinism():
    a = dh_keygen(DH_GROUP_TEST, rng(5))
    b = dh_keygen(DH_GROUP_TEST, rng(5))
    assert (a.sk, a.pk) == (b.sk, b.pk)


def test_agreement_symmetry():
    for seed in range(20):
        a = dh_keygen(DH_GROUP_TEST, rng(seed))
        b = dh_keygen(DH_GROUP_TEST, rng(seed + 100))
        assert dh_agree(a.sk, b.pk, DH_GROUP_TEST) == \
            dh_agree(b.sk, a.pk, DH_GROUP_TEST)


def test_agreement_symmetry_production_group():
    a = dh_keygen(DH_GROUP_2048, rng(1))
    b = dh_keygen(DH_GROUP_2048, rng(2))
    assert dh_agree(a.sk, b.pk, DH_GROUP_2048) == \
        dh_agree(b.sk, a.pk, DH_GROUP_2048)


def test_forced_shared_value():
    # both secrets 1: shared secret is g itself
    import hashlib
    seed = dh_agree(1, DH_GROUP_TEST.g, DH_GROUP_TEST)
    expected = hashlib.sha256(
        DH_GROUP_TEST.g.to_bytes(DH_GROUP_TEST.residue_bytes, "big")).digest()
    assert seed == expected


def test_invalid_public_key_rejected():
    with pytest.raises(InvalidPublicKey):
        dh_agree(3, 1, DH_GROUP_TEST)
    # 2 generates the full group mod 1019, not the order-509 subgroup
    assert pow(2, DH_GROUP_TEST.subgroup_order, DH_GROUP_TEST.p) != 1
    with pytest.raises(InvalidPublicKey):
        dh_agree(3, 2, DH_GROUP_TEST)


def test_distinct_pairs_distinct_seeds():
    # 62-bit safe prime (p = 2q+1, both prime); g=4 generates the
    # order-q subgroup.  Big enough that seed collisions mean a bug.
    medium = DhParams(p=4611686018427394499, g=4,
                      subgroup_order=2305843009213697249)
    pairs = [dh_keygen(medium, rng(100 + i)) for i in range(46)]
    seeds = set()
    count = 0
    for (i, j) in combinations(range(46), 2):
        seeds.add(dh_agree(pairs[i].sk, pairs[j].pk, medium))
        count += 1
    assert count >= 1000
    assert len(seeds) == count


# --- mask streams ------------------------------------------------------------


def test_stream_count_zero():
    assert len(stream_expand(b"\x01" * 32, TAG_PAIRWISE, 0, F17)) == 0


def test_stream_determinism():
    a = stream_expand(b"\x02" * 32, TAG_PAIRWISE, 100, M61F)
    b = stream_expand(b"\x02" * 32, TAG_PAIRWISE, 100, M61F)
    assert np.array_equal(a, b)


def test_stream_domain_tags_differ():
    seed = b"\x03" * 32
    a = stream_expand(seed, b"pairwise", 50, M61F)
    b = stream_expand(seed, b"personal", 50, M61F)
    assert not np.array_equal(a, b)


def test_stream_uniformity_chi_square():
    draws = stream_expand(b"\x04" * 32, TAG_PAIRWISE, 100_000, F17)
    counts = np.bincount(draws.astype(np.int64), minlength=17)
    chi2 = ((counts - len(draws) / 17) ** 2 / (len(draws) / 17)).sum()
    assert chi2 < stats.chi2.ppf(0.99, df=16)


# --- LWE ----------------------------------------------------------------------


def test_matrix_identical_across_clients():
    p = LweParams(n_lwe=5, sigma=1.0, matrix_seed=b"\x05" * 32)
    assert np.array_equal(lwe_matrix(p, 7, M61F), lwe_matrix(p, 7, M61F))


def test_matrix_is_the_stream_in_row_major_order():
    p = LweParams(n_lwe=3, sigma=1.0, matrix_seed=b"\x06" * 32)
    A = lwe_matrix(p, 2, F17)
    flat = stream_expand(b"\x06" * 32, TAG_MATRIX, 6, F17)
    assert np.array_equal(A.reshape(-1), flat)


def test_matrix_avalanche():
    base = LweParams(n_lwe=20, sigma=1.0, matrix_seed=b"\x07" * 32)
    tweak = LweParams(n_lwe=20, sigma=1.0,
                      matrix_seed=b"\x08" + b"\x07" * 31)
    a = lwe_matrix(base, 50, M61F)
    b = lwe_matrix(tweak, 50, M61F)
    assert (a != b).mean() >= 0.99


def test_gaussian_degenerate_sigma():
    e = gaussian_error(1e-6, 1000, rng(1), M61F)
    assert not e.any()


def test_gaussian_moments():
    e = gaussian_error(3.0, 100_000, rng(2), M61F)
    signed = np.where(e > M61F.q // 2, e.astype(np.int64) - M61F.q,
                      e.astype(np.int64))
    assert abs(signed.mean()) < 0.05
    assert abs(signed.std() - 3.0) < 0.15


def test_gaussian_negative_values_in_upper_half():
    e = gaussian_error(5.0, 10_000, rng(3), M61F)
    assert (e > M61F.q // 2).any()


def test_lwe_mask_identity_without_mask():
    A = lwe_matrix(LweParams(n_lwe=3, sigma=1.0, matrix_seed=b"\x09" * 32),
                   4, F17)
    w = np.array([1, 2, 3, 4], dtype=np.uint64)
    zero_s = np.zeros(3, dtype=np.uint64)
    zero_e = np.zeros(4, dtype=np.uint64)
    assert np.array_equal(lwe_mask(w, zero_s, zero_e, A, F17), w)


def test_lwe_mask_inverts():
    g = rng(4)
    A = lwe_matrix(LweParams(n_lwe=3, sigma=1.0, matrix_seed=b"\x0a" * 32),
                   4, F17)
    w = g.integers(0, 17, 4).astype(np.uint64)
    s = g.integers(0, 17, 3).astype(np.uint64)
    e = g.integers(0, 17, 4).astype(np.uint64)
    h = lwe_mask(w, s, e, A, F17)
    As = mat_vec_mod(A, s, F17)
    recovered = [(int(hi) - int(ai) - int(ei)) % 17
                 for hi, ai, ei in zip(h, As, e)]
    assert recovered == [int(v) for v in w]


def test_lwe_mask_three_client_sum():
    g = rng(5)
    params = LweParams(n_lwe=4, sigma=1.0, matrix_seed=b"\x0b" * 32)
    A = lwe_matrix(params, 5, M61F)
    ws = [g.integers(0, M61F.q, 5).astype(np.uint64) for _ in range(3)]
    ss = [g.integers(0, M61F.q, 4).astype(np.uint64) for _ in range(3)]
    es = [g.integers(0, 10, 5).astype(np.uint64) for _ in range(3)]
    hs = [lwe_mask(w, s, e, A, M61F) for w, s, e in zip(ws, ss, es)]
    qq = M61F.q
    h_sum = [(int(a) + int(b) + int(c)) % qq for a, b, c in zip(*hs)]
    s_sum = np.array([(int(a) + int(b) + int(c)) % qq for a, b, c in zip(*ss)],
                     dtype=np.uint64)
    As = mat_vec_mod(A, s_sum, M61F)
    lhs = [(h - int(a)) % qq for h, a in zip(h_sum, As)]
    rhs = [(int(a) + int(b) + int(c) + int(d) + int(e) + int(f)) % qq
           for a, b, c, d, e, f in zip(*ws, *es)]
    assert lhs == rhs


def test_lwe_linearity_exact():
    g = rng(6)
    params = LweParams(n_lwe=6, sigma=1.0, matrix_seed=b"\x0c" * 32)
    A = lwe_matrix(params, 8, M61F)
    w1, w2 = (g.integers(0, M61F.q, 8).astype(np.uint64) for _ in range(2))
    s1, s2 = (g.integers(0, M61F.q, 6).astype(np.uint64) for _ in range(2))
    e1, e2 = (g.integers(0, 50, 8).astype(np.uint64) for _ in range(2))
    left = add_mod(lwe_mask(w1, s1, e1, A, M61F),
                   lwe_mask(w2, s2, e2, A, M61F), M61F)
    right = lwe_mask(add_mod(w1, w2, M61F), add_mod(s1, s2, M61F),
                     add_mod(e1, e2, M61F), A, M61F)
    assert np.array_equal(left, right)


def test_lwe_mask_dimension_mismatch():
    A = lwe_matrix(LweParams(n_lwe=3, sigma=1.0, matrix_seed=b"\x0d" * 32),
                   4, F17)
    w = np.zeros(5, dtype=np.uint64)
    with pytest.raises(DimensionMismatch):
        lwe_mask(w, np.zeros(3, dtype=np.uint64),
                 np.zeros(5, dtype=np.uint64), A, F17)


@pytest.mark.parametrize("field,m,d", [(M61F, 37, 710), (M61F, 64, 13),
                                       (F17, 9, 5)])
def test_limb_matvec_matches_reference(field, m, d):
    g = rng(m + d)
    A = g.integers(0, field.q, size=(m, d)).astype(np.uint64)
    s = g.integers(0, field.q, size=d).astype(np.uint64)
    ops = LweMatrixOps(A, field)
    assert np.array_equal(ops.matvec(s), mat_vec_mod(A, s, field))


def test_lwe_params_validation():
    with pytest.raises(ValueError):
        LweParams(n_lwe=0)
    with pytest.raises(ValueError):
        LweParams(sigma=0.0)
