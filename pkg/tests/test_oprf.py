import dataclasses
import math
import random

import pytest
from scipy.stats import chisquare

from pepsi import oprf, opcount
from pepsi.group import hash_tag
from pepsi.symmetric import DecryptionError, NotMySubscriptionError

from conftest import TOY_D, TOY_E, TOY_N, brute_mod_exp


def test_setup_invariants(rsa_keys):
    params, secret = rsa_keys
    assert params.modulus_bits == 2048
    assert params.N == secret.p * secret.q and params.N % 2 == 1
    phi = (secret.p - 1) * (secret.q - 1)
    assert math.gcd(params.e, phi) == 1 and params.e * secret.d % phi == 1
    for p in (secret.p, secret.q):
        assert p % 4 == 3 and oprf.is_safe_prime(p)


def test_setup_random_exponent():
    params, secret = oprf.oprf_setup(1024, random.Random(21), e=None)
    phi = (secret.p - 1) * (secret.q - 1)
    assert params.e < phi and params.e * secret.d % phi == 1


def test_setup_refuses_small_modulus():
    with pytest.raises(ValueError):
        oprf.oprf_setup(512)


def test_safe_prime_small():
    rng = random.Random(22)
    for bits in (16, 32, 64, 128):
        p = oprf.safe_prime(bits, rng)
        assert p.bit_length() == bits and oprf.is_safe_prime(p)


def test_setup_is_seed_deterministic():
    assert oprf.oprf_setup(1024, random.Random(5)) == oprf.oprf_setup(1024, random.Random(5))


def test_sign_verify_round_trip(rsa_keys):
    params, secret = rsa_keys
    digest = oprf.fdh(params, b"some|id")
    sigma = pow(digest, secret.d, params.N)
    assert oprf.mod_exp(sigma, params.e, params.N) == digest


def test_fdh_range(rsa_keys):
    params, _ = rsa_keys
    for i in range(100):
        x = oprf.fdh(params, b"%d" % i)
        assert 1 < x < params.N and math.gcd(x, params.N) == 1
    assert oprf.fdh(params, b"a") == oprf.fdh(params, b"a")


def test_toy_blind_value(toy_rsa):
    params, _ = toy_rsa
    state, mu = oprf.blind_digest(params, 2790, r=5)
    assert mu == 2790 * brute_mod_exp(5, 17, 3233) % 3233


def test_toy_unblind_yields_textbook_signature(toy_rsa):
    params, secret = toy_rsa
    assert brute_mod_exp(2790, TOY_D, TOY_N) == 65  # oracle re-check
    state, mu = oprf.blind_digest(params, 2790, r=5)
    sig = oprf.unblind(params, state, oprf.sign_blinded(secret, mu))
    assert sig.sigma == 65


def test_blind_fresh_and_reduced(rsa_keys):
    params, _ = rsa_keys
    _, a = oprf.blind(params, b"x")
    _, b = oprf.blind(params, b"x")
    assert a != b and 0 <= a < params.N
    with pytest.raises(ValueError):
        oprf.blind(params, b"")


def test_crt_equals_plain(rsa_keys):
    params, secret = rsa_keys
    rng = random.Random(23)
    for _ in range(100):
        mu = rng.randrange(params.N)
        assert oprf.sign_blinded(secret, mu) == oprf.mod_exp(mu, secret.d, params.N)
    assert oprf.sign_blinded(secret, 1) == 1
    assert oprf.sign_blinded(secret, 0) == 0
    with pytest.raises(ValueError):
        oprf.sign_blinded(secret, params.N)


def test_blind_signature_equals_direct(rsa_keys, rng):
    params, secret = rsa_keys
    for i in range(20):
        ident = b"id-%d" % rng.randrange(10**9)
        sig = oprf.obtain_signature(params, secret, ident, rng=rng)
        assert sig.sigma == pow(oprf.fdh(params, ident), secret.d, params.N)
        assert oprf.signature_is_valid(params, sig)
        assert sig == oprf.obtain_signature(params, secret, ident, mode="plain")


def test_tampered_blind_signature(rsa_keys, rng):
    params, secret = rsa_keys
    state, mu = oprf.blind(params, b"x", rng)
    with pytest.raises(oprf.MalformedSignatureError, match="malformed signature"):
        oprf.unblind(params, state, oprf.sign_blinded(secret, mu) * 2 % params.N)


def test_oprf_eval(rsa_keys, rng):
    params, secret = rsa_keys
    a = oprf.oprf_eval(params, secret, b"x", rng)
    direct = hash_tag([pow(oprf.fdh(params, b"x"), secret.d, params.N).to_bytes(256, "big")])
    assert a == direct == oprf.oprf_eval(params, secret, b"x", rng)


def test_oprf_eval_distinct(rsa_keys_1024):
    params, secret = rsa_keys_1024
    rng = random.Random(24)
    outs = {oprf.oprf_eval(params, secret, b"x%d" % i, rng) for i in range(2000)}
    assert len(outs) == 2000


def test_signature_encoding(rsa_keys, rng):
    params, secret = rsa_keys
    sig = oprf.obtain_signature(params, secret, b"x", rng=rng)
    raw = sig.to_bytes()
    assert raw[:2] == (2048).to_bytes(2, "big") and len(raw) == 258
    assert oprf.Signature.from_bytes(raw, b"x") == sig


def test_subscribe_report_notify(rsa_keys, rng):
    params, secret = rsa_keys
    q_sig = oprf.obtain_signature(params, secret, b"pollution|nyc", rng=rng)
    n_sig = oprf.obtain_signature(params, secret, b"pollution|nyc", rng=rng)
    sub, upload = oprf.oprf_subscribe(q_sig, b"q")
    assert upload.epoch is None and upload.version == 2
    assert oprf.oprf_subscribe(q_sig)[0].tag == sub.tag
    a = oprf.oprf_produce_report(n_sig, b"42", rng)
    b = oprf.oprf_produce_report(n_sig, b"42", rng)
    assert a.tag == b.tag == sub.tag and a.ciphertext != b.ciphertext and a.epoch is None
    assert oprf.oprf_open_notification(sub, a).payload == b"42"
    other = oprf.oprf_subscribe(oprf.obtain_signature(params, secret, b"pollution|la", rng=rng))[0]
    assert other.tag != sub.tag
    with pytest.raises(NotMySubscriptionError):
        oprf.oprf_open_notification(other, a)


def test_role_symmetry(rsa_keys, rng):
    params, secret = rsa_keys
    sig = oprf.obtain_signature(params, secret, b"noise|paris", rng=rng)
    sub, _ = oprf.oprf_subscribe(sig)
    assert oprf.oprf_open_notification(sub, oprf.oprf_produce_report(sig, b"55dB", rng)).payload == b"55dB"


def test_report_does_no_modular_exponentiation(rsa_keys, rng):
    params, secret = rsa_keys
    sig = oprf.obtain_signature(params, secret, b"x", rng=rng)
    with opcount.counting() as c:
        oprf.oprf_produce_report(sig, b"1", rng)
    assert c.exp_calls == 0 and c.pairings == 0


def test_bit_flip_and_collision(rsa_keys, rng):
    params, secret = rsa_keys
    sig = oprf.obtain_signature(params, secret, b"x", rng=rng)
    sub, _ = oprf.oprf_subscribe(sig)
    env = oprf.oprf_produce_report(sig, b"data", rng)
    flipped = dataclasses.replace(env, ciphertext=env.ciphertext[:-1] + bytes([env.ciphertext[-1] ^ 1]))
    with pytest.raises(DecryptionError):
        oprf.oprf_open_notification(sub, flipped)
    target = oprf.oprf_report_material(sig, 8)[0]
    i = 0
    while True:
        other = oprf.sign_direct(params, secret, b"y%d" % i)
        if oprf.oprf_report_material(other, 8)[0] == target:
            break
        i += 1
    colliding_sub, _ = oprf.oprf_subscribe(other, tag_bits=8)
    env_short = oprf.oprf_produce_report(sig, b"data", rng, tag_bits=8)
    assert env_short.tag == colliding_sub.tag
    with pytest.raises(DecryptionError):
        oprf.oprf_open_notification(colliding_sub, env_short)


def test_oversized(rsa_keys, rng):
    sig = oprf.obtain_signature(*rsa_keys, b"x", rng=rng)
    with pytest.raises(ValueError):
        oprf.oprf_produce_report(sig, bytes(70_000))


def test_oprf_seam(rsa_keys, rng):
    f = oprf.BlindRsaOprf(*rsa_keys)
    state, mu = f.blind(b"abc", rng)
    assert f.finalize(state, f.evaluate(mu)) == oprf.oprf_eval(*rsa_keys, b"abc", rng)
    with pytest.raises(ValueError):
        oprf.BlindRsaOprf(rsa_keys[0]).evaluate(mu)


@pytest.mark.slow
def test_authority_view_uniform(rsa_keys):
    params, _ = rsa_keys
    rng = random.Random(25)
    for ident in (b"a", b"b"):
        counts = [0] * 256
        for _ in range(10_000):
            _, mu = oprf.blind(params, ident, rng)
            for byte in mu.to_bytes(256, "big")[2:]:
                counts[byte] += 1
        assert chisquare(counts).pvalue > 0.001
