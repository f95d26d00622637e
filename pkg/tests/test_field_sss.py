import itertools

import numpy as np
import pytest

from modules.field_sss import (
    AlignmentError,
    AmbiguityError,
    CannotDetectError,
    DegreeOverflowError,
    FieldElement,
    InsufficientSharesError,
    ParameterError,
    Share,
    SharingParams,
    add_shares,
    check_modulus,
    detect_outliers,
    reconstruct,
    share_secret,
    square_share,
    sum_shares,
    zero_share,
)


class FixedCoefficients:
    """Randomness returning preset polynomial coefficients."""

    def __init__(self, coefficients):
        self.coefficients = coefficients

    def integers(self, low, high, size):
        return np.asarray(self.coefficients[:size])


def shares_of(secret, t, n, p, rng):
    return share_secret(FieldElement.of(secret, p), SharingParams.default(t, n, p), rng)


def corrupt(share, delta):
    return Share(share.eval_point, share.value + FieldElement.of(delta, share.modulus), share.degree_hint, share.power)


def test_degree_zero_shares_equal_secret(rng):
    shares = shares_of(5, 1, 3, 13, rng)
    assert [s.value.value for s in shares] == [5, 5, 5]


def test_share_values_follow_polynomial():
    shares = share_secret(FieldElement.of(5, 13), SharingParams.default(2, 3, 13), FixedCoefficients([3]))
    assert [(s.eval_point.value, s.value.value) for s in shares] == [(1, 8), (2, 11), (3, 1)]


def test_reconstruct_hand_example():
    shares = [Share.of(1, 8, 13, 1), Share.of(2, 11, 13, 1)]
    assert reconstruct(shares, 1).value == 5


@pytest.mark.parametrize("s", [0, 4, 12])
def test_reconstruct_constant(s):
    shares = [Share.of(x, s, 13, 0) for x in (1, 2, 3)]
    assert reconstruct(shares, 0).value == s


def test_any_three_of_five_reconstruct(rng):
    shares = shares_of(7, 3, 5, 13, rng)
    for subset in itertools.combinations(shares, 3):
        assert reconstruct(list(subset), 2).value == 7
    with pytest.raises(InsufficientSharesError):
        reconstruct(shares[:2], 2)


@pytest.mark.parametrize("p", [13, 2**31 - 1])
def test_round_trip_every_t_subset(p):
    rng = np.random.default_rng(p)
    for trial in range(200):
        t = int(rng.integers(1, 4))
        n = int(rng.integers(2 * t - 1, 7))
        secret = int(rng.integers(0, p))
        shares = shares_of(secret, t, n, p, rng)
        for subset in itertools.combinations(shares, t):
            assert reconstruct(list(subset), t - 1).value == secret


def test_add_shares_homomorphic(rng):
    a = shares_of(5, 2, 3, 13, rng)
    b = shares_of(3, 2, 3, 13, rng)
    assert reconstruct([add_shares(x, y) for x, y in zip(a, b)], 1).value == 8


def test_adding_zero_shares_is_identity(rng):
    a = shares_of(6, 2, 3, 13, rng)
    zero = shares_of(0, 2, 3, 13, rng)
    assert reconstruct([add_shares(x, y) for x, y in zip(a, zero)], 1).value == 6
    assert reconstruct([add_shares(x, zero_share(x.eval_point, 1)) for x in a], 1).value == 6


def test_sum_of_votes(rng):
    p = 13
    vectors = [shares_of(v, 2, 3, p, rng) for v in (1, 1, p - 1)]
    summed = [sum_shares(column) for column in zip(*vectors)]
    assert reconstruct(summed, 1).value == 1


def test_additive_homomorphism_large(rng):
    p = 2**31 - 1
    secrets = [int(x) for x in rng.integers(0, p, size=50)]
    vectors = [shares_of(s, 3, 5, p, rng) for s in secrets]
    summed = [sum_shares(column) for column in zip(*vectors)]
    assert reconstruct(summed[:3], 2).value == sum(secrets) % p


def test_add_shares_rejects_misaligned(rng):
    a = shares_of(1, 2, 3, 13, rng)
    with pytest.raises(AlignmentError):
        add_shares(a[0], a[1])
    with pytest.raises(AlignmentError):
        add_shares(a[0], square_share(a[0]))


def test_square_share_reconstructs_square(rng):
    shares = shares_of(2, 2, 3, 13, rng)
    squared = [square_share(s) for s in shares]
    assert squared[0].degree_hint == 2 and squared[0].power == 2
    assert reconstruct(squared, 2).value == 4


def test_square_of_minus_one(rng):
    shares = shares_of(12, 2, 3, 13, rng)
    assert reconstruct([square_share(s) for s in shares], 2).value == 1


def test_square_twice_overflows(rng):
    share = shares_of(2, 2, 3, 13, rng)[0]
    with pytest.raises(DegreeOverflowError):
        square_share(square_share(share))


@pytest.mark.parametrize("t", [2, 3])
def test_degree_growth_law(t):
    p = 2**31 - 1
    rng = np.random.default_rng(t)
    n = 2 * t - 1
    shares = shares_of(p - 1, t, n, p, rng)
    squared = [square_share(s) for s in shares]
    for subset in itertools.combinations(squared, 2 * t - 1):
        assert reconstruct(list(subset), 2 * (t - 1)).value == 1
    for subset in itertools.combinations(squared, 2 * t - 2):
        with pytest.raises(InsufficientSharesError):
            reconstruct(list(subset), 2 * (t - 1))
    # Asking for too low a degree is refused as well
    with pytest.raises(InsufficientSharesError):
        reconstruct(squared, t - 1)


def test_detect_single_outlier(rng):
    shares = shares_of(9, 2, 5, 13, rng)
    shares[3] = corrupt(shares[3], 1)
    value, outliers = detect_outliers(shares, 1)
    assert value.value == 9
    assert outliers == {4}


def test_detect_no_outliers(rng):
    shares = shares_of(9, 2, 5, 13, rng)
    value, outliers = detect_outliers(shares, 1)
    assert value.value == 9 and outliers == set()


def test_detect_needs_redundancy(rng):
    shares = shares_of(9, 2, 3, 13, rng)[:2]
    with pytest.raises(CannotDetectError):
        detect_outliers(shares, 1)


def test_detect_ambiguous_without_majority(rng):
    p = 2**31 - 1
    shares = shares_of(9, 2, 4, p, rng)
    shares[2] = corrupt(shares[2], 5)
    shares[3] = corrupt(shares[3], 11)
    with pytest.raises(AmbiguityError):
        detect_outliers(shares, 1)


def test_detect_flags_exactly_corrupted_points():
    p = 2**31 - 1
    rng = np.random.default_rng(5)
    for n in range(4, 8):
        for degree in (1, 2):
            t = degree + 1
            if n < 2 * t - 1:
                continue
            for f in range(0, n):
                if not (n - f >= degree + 2 and n - f > f + degree):
                    continue
                shares = shares_of(42, t, n, p, rng)
                corrupted = set(int(i) for i in rng.permutation(n)[:f])
                for i in corrupted:
                    shares[i] = corrupt(shares[i], int(rng.integers(1, p)))
                value, outliers = detect_outliers(shares, degree)
                assert value.value == 42
                assert outliers == {i + 1 for i in corrupted}


def test_sharing_params_validation():
    with pytest.raises(ParameterError):
        SharingParams.default(3, 4, 13)
    with pytest.raises(ParameterError):
        SharingParams(2, 3, 13, tuple(FieldElement.of(x, 13) for x in (1, 1, 2)))
    with pytest.raises(ParameterError):
        SharingParams.default(2, 3, 12)


def test_eval_point_zero_is_reserved():
    with pytest.raises(ParameterError):
        Share.of(0, 3, 13, 1)


def test_check_modulus_bounds():
    check_modulus(2**31 - 1, 100)
    with pytest.raises(ParameterError):
        check_modulus(13, 2)
    with pytest.raises(ParameterError):
        check_modulus(15, 1)


@pytest.mark.parametrize("modulus", [9, 16, 25, 27])
def test_prime_power_moduli_rejected(modulus):
    with pytest.raises(ParameterError):
        check_modulus(modulus, 1)
    with pytest.raises(ParameterError):
        SharingParams.default(1, 3, modulus)
    with pytest.raises(ParameterError):
        FieldElement.of(2, modulus) + FieldElement.of(3, modulus)


def test_field_element_signed_representation():
    assert FieldElement.of(-1, 13).value == 12
    assert FieldElement.of(-1, 13).to_signed() == -1
    assert FieldElement.of(3, 13).to_signed() == 3


@pytest.mark.parametrize("secret", [1, 12])
def test_two_share_view_is_uniform(secret):
    from scipy.stats import chisquare

    p, trials = 13, 10_000
    rng = np.random.default_rng(2024 + secret)
    params = SharingParams.default(3, 5, p)
    counts = np.zeros(p * p)
    for _ in range(trials):
        shares = share_secret(FieldElement.of(secret, p), params, rng)
        counts[shares[1].value.value * p + shares[3].value.value] += 1
    assert chisquare(counts).pvalue > 0.01
