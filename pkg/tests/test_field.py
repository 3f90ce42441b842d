import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secaggsim.errors import DecodeRange, ZeroInverse
from secaggsim.field import (
    DEFAULT_FIELD,
    M61,
    FieldPrime,
    FixedPointConfig,
    bytes_to_elems,
    decode_vec,
    elems_to_bytes,
    encode_vec,
    field_arith,
    fp_decode,
    fp_encode,
    mod_inverse,
    mul_mod,
    mul_mod_m61,
)

F17 = FieldPrime(17)
F7 = FieldPrime(7)


def test_add_wraparound():
    assert field_arith(M61 - 1, 1, "add") == 0


def test_mul_sub_small_field():
    # direct modular arithmetic
    assert field_arith(3, 5, "mul", F17) == 15
    assert field_arith(2, 5, "sub", F17) == 14


def test_unknown_op_rejected():
    with pytest.raises(ValueError):
        field_arith(1, 2, "div", F17)


def test_non_prime_modulus_rejected():
    with pytest.raises(ValueError):
        FieldPrime(15)
    with pytest.raises(ValueError):
        FieldPrime(1 << 64)


@pytest.mark.parametrize("field", [F7, F17])
def test_mod_inverse_matches_brute_force(field):
    for a in range(1, field.q):
        expected = next(x for x in range(1, field.q) if a * x % field.q == 1)
        assert mod_inverse(a, field) == expected


def test_mod_inverse_identity_and_zero():
    assert mod_inverse(1) == 1
    assert mod_inverse(2, F7) == 4
    assert mod_inverse(3, F17) == 6
    with pytest.raises(ZeroInverse):
        mod_inverse(0, F17)


@given(a=st.integers(1, M61 - 1))
@settings(max_examples=50)
def test_inverse_property(a):
    f = DEFAULT_FIELD
    assert f.mul(a, f.inv(a)) == 1


@given(a=st.integers(0, M61 - 1), b=st.integers(0, M61 - 1),
       c=st.integers(0, M61 - 1))
@settings(max_examples=50)
def test_add_mul_associative_commutative(a, b, c):
    f = DEFAULT_FIELD
    assert f.add(a, b) == f.add(b, a)
    assert f.mul(a, b) == f.mul(b, a)
    assert f.add(f.add(a, b), c) == f.add(a, f.add(b, c))
    assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))


@given(a=st.integers(0, M61 - 2), b=st.integers(0, M61 - 2))
@settings(max_examples=200)
def test_mersenne_vector_mul_matches_int(a, b):
    got = mul_mod_m61(np.array([a], dtype=np.uint64),
                      np.array([b], dtype=np.uint64))[0]
    assert int(got) == a * b % M61


def test_generic_mul_mod_small_field():
    a = np.arange(17, dtype=np.uint64)
    b = np.full(17, 5, dtype=np.uint64)
    assert list(mul_mod(a, b, F17)) == [i * 5 % 17 for i in range(17)]


# --- fixed point -------------------------------------------------------------


def test_fp_encode_examples():
    assert fp_encode(0.0) == 0
    assert fp_encode(1.5) == 98304  # round(1.5 * 2^16)
    assert fp_encode(-1.0) == M61 - 65536


def test_fp_roundtrip_quarter():
    assert fp_decode(fp_encode(0.25), 1) == 0.25


def test_fp_sum_of_two():
    cfg = FixedPointConfig()
    total = (fp_encode(1.5, cfg) + fp_encode(-2.0, cfg)) % M61
    assert abs(fp_decode(total, 2, cfg) - (-0.5)) <= 2 ** -16


def test_fp_sum_of_hundred_random():
    rng = np.random.default_rng(1)
    xs = rng.uniform(-1, 1, size=100)
    cfg = FixedPointConfig()
    total = int(sum(fp_encode(float(x), cfg) for x in xs) % M61)
    assert abs(fp_decode(total, 100, cfg) - xs.sum()) <= 100 * 2 ** -17


@given(x=st.floats(-2.0 ** 20, 2.0 ** 20, allow_nan=False))
@settings(max_examples=100)
def test_fp_roundtrip_tolerance(x):
    assert abs(fp_decode(fp_encode(x), 1) - x) <= 2 ** -17


def test_fp_clipping_not_rejection():
    assert fp_encode(2.0 ** 30) == fp_encode(2.0 ** 20)


def test_fp_decode_range_guard():
    with pytest.raises(DecodeRange):
        fp_decode(M61 // 2, 1)


def test_fp_config_validation():
    with pytest.raises(ValueError):
        FixedPointConfig(frac_bits=0)
    with pytest.raises(ValueError):
        FixedPointConfig().check_capacity(1 << 30, DEFAULT_FIELD)


def test_vector_codec_matches_scalar():
    xs = [0.0, 1.5, -1.0, 0.25, -3.75]
    enc = encode_vec(xs)
    assert [int(v) for v in enc] == [fp_encode(x) for x in xs]
    dec = decode_vec(enc, 1)
    assert np.allclose(dec, xs, atol=2 ** -17)


def test_vector_decode_range_guard():
    with pytest.raises(DecodeRange):
        decode_vec(np.array([M61 // 2], dtype=np.uint64), 1)


def test_wire_format_roundtrip():
    v = np.array([0, 1, M61 - 1, 12345678901234567], dtype=np.uint64)
    blob = elems_to_bytes(v)
    assert len(blob) == 8 * len(v)
    assert blob[:8] == b"\x00" * 8  # big-endian zero
    assert np.array_equal(bytes_to_elems(blob), v)
