import random

import pytest

from pepsi import ibe, oprf, protocol


def brute_mod_exp(base, exponent, modulus):
    """Repeated multiplication; only for small exponents."""
    acc = 1 % modulus
    for _ in range(exponent):
        acc = acc * base % modulus
    return acc


@pytest.fixture
def rng():
    return random.Random(20240607)


@pytest.fixture(scope="session")
def ibe_keys():
    return ibe.ibe_setup(rng=random.Random(1))


@pytest.fixture(scope="session")
def pepsi_keys():
    return protocol.pepsi_setup(rng=random.Random(2))


@pytest.fixture(scope="session")
def rsa_keys():
    return oprf.oprf_setup(2048, rng=random.Random(3))


@pytest.fixture(scope="session")
def rsa_keys_1024():
    return oprf.oprf_setup(1024, rng=random.Random(4))


# textbook RSA: p=61, q=53
TOY_N, TOY_E, TOY_D = 3233, 17, 2753


@pytest.fixture
def toy_rsa():
    return oprf.RsaParams(TOY_N, TOY_E), oprf.RsaSecret(TOY_D, 61, 53)
