import itertools
import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aleph_lab.crypto import (
    BACKENDS,
    STANDARD,
    TINY,
    ConfigError,
    DecodeError,
    DedicatedKeyPairs,
    Polynomial,
    ReconstructionError,
    SignatureShare,
    combine_shares,
    create_share,
    dec_dedicated,
    enc_dedicated,
    generate_keys,
    generate_signature,
    hash_bytes,
    hash_to_group,
    lagrange_at_zero,
    verify_share,
)
from aleph_lab.crypto.signing import keygen, sign, verify

VECTORS = Path(__file__).parent / "vectors"


def in_subgroup(x, backend):
    # Euler's criterion, independent of the backend's Legendre-symbol check
    return 0 < x < backend.p and pow(x, backend.q, backend.p) == 1


class TestBackend:
    @pytest.mark.parametrize("backend", [TINY, STANDARD])
    def test_generator_has_order_q(self, backend):
        assert backend.exp(backend.g, backend.q) == 1
        assert backend.g != 1

    @pytest.mark.parametrize("backend", [TINY, STANDARD])
    def test_q_and_p_prime(self, backend):
        import gmpy2

        assert gmpy2.is_prime(backend.q) and gmpy2.is_prime(backend.p)
        assert backend.p == 2 * backend.q + 1

    @given(a=st.integers(0, TINY.q - 1), b=st.integers(0, TINY.q - 1))
    def test_exponent_laws(self, a, b):
        g = TINY.g
        assert TINY.exp(g, 0) == TINY.identity
        assert TINY.exp(TINY.exp(g, a), b) == TINY.exp(g, a * b % TINY.q)

    @given(x=st.integers(1, TINY.p - 1))
    def test_membership_matches_euler(self, x):
        assert TINY.is_element(x) == in_subgroup(x, TINY)

    def test_bad_lengths_rejected(self):
        with pytest.raises(ValueError):
            TINY.element_from_bytes(b"\x00" * (TINY.element_len + 1))
        with pytest.raises(ValueError):
            TINY.scalar_from_bytes(b"")


class TestHashing:
    def test_pinned_hash_to_group_vectors(self):
        for v in json.loads((VECTORS / "hash_to_group.json").read_text()):
            backend = BACKENDS[v["backend"]]
            got = hash_to_group(bytes.fromhex(v["msg"]), backend)
            assert got == int(v["element"], 16)
            assert in_subgroup(got, backend)

    def test_empty_input_accepted(self):
        assert in_subgroup(hash_to_group(b"", STANDARD), STANDARD)
        assert len(hash_bytes(b"")) == 32

    def test_digest_birthday_sample(self):
        digests = {hash_bytes(i.to_bytes(4, "big")) for i in range(100_000)}
        assert len(digests) == 100_000

    @given(st.binary(max_size=64))
    def test_hash_to_group_lands_in_subgroup(self, m):
        assert in_subgroup(hash_to_group(m, TINY), TINY)


class TestKeys:
    def test_same_seed_same_keys(self):
        a = generate_keys(4, 1, random.Random(5), TINY)
        b = generate_keys(4, 1, random.Random(5), TINY)
        assert a[1] == b[1]
        assert a[0].degree == 1 and len(a[1].tk) == 4

    def test_constant_polynomial(self):
        _, keys = generate_keys(4, 1, random.Random(0), TINY, constant=1234)
        assert set(keys.vk) == {TINY.exp(TINY.g, 1234)}

    def test_bad_node_count(self):
        with pytest.raises(ConfigError):
            generate_keys(5, 1, random.Random(0), TINY)

    def test_keys_follow_the_polynomial(self):
        poly, keys = generate_keys(7, 2, random.Random(3), TINY)
        for i in range(7):
            assert keys.tk[i] == poly(i + 1)
            assert keys.vk[i] == pow(TINY.g, keys.tk[i], TINY.p)
        assert keys.joint_vk == pow(TINY.g, poly(0), TINY.p)

    def test_any_three_keys_interpolate_the_secret(self):
        poly, keys = generate_keys(7, 2, random.Random(3), TINY)
        q = TINY.q
        for idx in itertools.combinations(range(7), 3):
            coeffs = lagrange_at_zero([i + 1 for i in idx], q)
            assert sum(c * keys.tk[i] for c, i in zip(coeffs, idx)) % q == poly(0)


class TestLagrange:
    def test_single_point(self):
        assert lagrange_at_zero([1], 11) == [1]

    def test_two_points_mod_11(self):
        assert lagrange_at_zero([1, 2], 11) == [2, 10]

    def test_two_points_identity_on_random_lines(self):
        rng = random.Random(0)
        for _ in range(100):
            a0, a1 = rng.randrange(11), rng.randrange(11)
            A = lambda x: (a0 + a1 * x) % 11  # noqa: E731
            assert (2 * A(1) + 10 * A(2)) % 11 == A(0)

    def test_coefficients_sum_to_one(self):
        assert sum(lagrange_at_zero([1, 2, 3], STANDARD.q)) % STANDARD.q == 1

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            lagrange_at_zero([1, 1], 11)

    @settings(max_examples=60)
    @given(st.integers(1, 3), st.integers(0, 2**32), st.data())
    def test_identity_for_all_subsets(self, f, seed, data):
        n = min(10, 3 * f + 1)
        rng = random.Random(seed)
        poly = Polynomial.random(f, TINY.q, rng)
        subset = data.draw(st.sets(st.integers(1, n), min_size=f + 1, max_size=f + 1))
        xs = sorted(subset)
        coeffs = lagrange_at_zero(xs, TINY.q)
        assert sum(c * poly(x) for c, x in zip(coeffs, xs)) % TINY.q == poly(0)


class TestShares:
    def setup_method(self):
        self.poly, self.keys = generate_keys(7, 2, random.Random(11), TINY)

    def test_zero_key_gives_identity(self):
        assert create_share(b"m", 0, 0, TINY).value == TINY.identity

    def test_deterministic(self):
        assert create_share(b"m", 77, 1, TINY) == create_share(b"m", 77, 1, TINY)

    def test_round_trip_and_tamper(self):
        s = create_share(b"nonce", self.keys.tk[2], 2, TINY)
        assert verify_share(b"nonce", s, 2, self.keys.vk, TINY)
        bad = SignatureShare(2, TINY.mul(s.value, TINY.g), s.proof)
        assert not verify_share(b"nonce", bad, 2, self.keys.vk, TINY)
        assert not verify_share(b"nonce", s, 3, self.keys.vk, TINY)

    @given(st.binary(max_size=16), st.binary(max_size=16))
    def test_nonce_domain_separation(self, m1, m2):
        if m1 == m2:
            return
        s = create_share(m1, self.keys.tk[0], 0, TINY)
        assert not verify_share(m2, s, 0, self.keys.vk, TINY) or hash_to_group(m1, TINY) == hash_to_group(m2, TINY)

    def test_dleq_rejects_every_other_exponent(self):
        # exhaustive tampering on the tiny group: keep the proof, swap the value
        tk = self.keys.tk[1]
        s = create_share(b"x", tk, 1, TINY)
        h = hash_to_group(b"x", TINY)
        accepted = 0
        value = 1
        for e in range(TINY.q):
            if e != tk and verify_share(b"x", SignatureShare(1, value, s.proof), 1, self.keys.vk, TINY):
                accepted += 1
            value = value * h % TINY.p
        assert accepted == 0

    def test_f_zero_single_share(self):
        poly, keys = generate_keys(1, 0, random.Random(1), TINY)
        s = create_share(b"m", keys.tk[0], 0, TINY)
        assert generate_signature(b"m", [s], keys.vk, 0, TINY) == s.value

    def test_subset_agreement_and_dealer_oracle(self):
        m = b"5|9"
        shares = [create_share(m, self.keys.tk[i], i, TINY) for i in range(5)]
        want = pow(hash_to_group(m, TINY), self.poly(0), TINY.p)
        for sub in itertools.combinations(shares, 3):
            assert generate_signature(m, list(sub), self.keys.vk, 2, TINY) == want

    def test_reconstruction_errors(self):
        m = b"m"
        shares = [create_share(m, self.keys.tk[i], i, TINY) for i in range(3)]
        with pytest.raises(ReconstructionError):
            generate_signature(m, shares[:2], self.keys.vk, 2, TINY)
        forged = SignatureShare(0, TINY.g, shares[0].proof)
        with pytest.raises(ReconstructionError):
            generate_signature(m, [forged] + shares[1:], self.keys.vk, 2, TINY)

    def test_f_shares_plus_any_guess_hit_once(self):
        # f = 1: one real share plus every possible guess for a second signer
        poly, keys = generate_keys(4, 1, random.Random(2), TINY)
        m = b"guess"
        h = hash_to_group(m, TINY)
        real = create_share(m, keys.tk[0], 0, TINY)
        want = pow(h, poly(0), TINY.p)
        hits = 0
        value = 1
        for _ in range(TINY.q):
            guess = SignatureShare(1, value, (0, 0))
            if combine_shares([real, guess], TINY) == want:
                hits += 1
            value = value * h % TINY.p
        assert hits / TINY.q <= 1 / TINY.q

    def test_frozen_signature_vectors(self):
        for v in json.loads((VECTORS / "threshold.json").read_text()):
            backend = BACKENDS[v["backend"]]
            assert backend.p == int(v["p"], 16)
            _, keys = generate_keys(v["n"], v["f"], random.Random(v["seed"]), backend)
            m = bytes.fromhex(v["nonce"])
            shares = [create_share(m, keys.tk[i], i, backend) for i in range(v["f"] + 1)]
            assert generate_signature(m, shares, keys.vk, v["f"], backend) == int(v["sigma"], 16)


class TestDedicatedEncryption:
    def setup_method(self):
        self.keys = DedicatedKeyPairs.generate(4, random.Random(1), TINY)

    @given(st.integers(0, TINY.q - 1))
    def test_round_trip(self, d):
        assert dec_dedicated(self.keys, 0, 3, enc_dedicated(self.keys, 0, 3, d)) == d

    def test_deterministic(self):
        assert enc_dedicated(self.keys, 1, 2, 99) == enc_dedicated(self.keys, 1, 2, 99)

    def test_cross_pair_decryption_differs(self):
        rng = random.Random(4)
        clashes = 0
        for _ in range(200):
            d = rng.randrange(TINY.q)
            if dec_dedicated(self.keys, 0, 2, enc_dedicated(self.keys, 1, 2, d)) == d:
                clashes += 1
        assert clashes <= 1

    def test_malformed_length(self):
        with pytest.raises(DecodeError):
            dec_dedicated(self.keys, 0, 1, b"\x00")


class TestSignatures:
    @given(st.binary(max_size=40))
    def test_sign_verify(self, msg):
        sk, pk = keygen(random.Random(0), TINY)
        sig = sign(sk, msg, TINY)
        assert verify(pk, msg, sig, TINY)
        assert not verify(pk, msg + b"x", sig, TINY)
