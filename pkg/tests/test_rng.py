from oodkit.rng import SplitMix64, derive_seed, stable_token_hash


def test_reference_outputs_seed_zero():
    # Published reference vector for the splitmix64 update function.
    gen = SplitMix64(0)
    assert gen.next_u64() == 0xE220A8397B1DCDAF
    assert gen.next_u64() == 0x6E789E6AA1B965F4
    assert gen.next_u64() == 0x06C45D188009454F


def test_determinism_and_independence():
    a = SplitMix64(99)
    b = SplitMix64(99)
    assert [a.next_u64() for _ in range(10)] == [b.next_u64() for _ in range(10)]
    c = SplitMix64(100)
    assert c.next_u64() != SplitMix64(99).next_u64()


def test_uniform_range():
    gen = SplitMix64(5)
    values = [gen.uniform() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in values)
    assert 0.4 < sum(values) / len(values) < 0.6


def test_normal_moments():
    gen = SplitMix64(6)
    values = [gen.normal() for _ in range(4000)]
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    assert abs(mean) < 0.06
    assert abs(var - 1.0) < 0.1


def test_shuffle_is_permutation_and_deterministic():
    items = list(range(20))
    first = items[:]
    SplitMix64(7).shuffle(first)
    second = items[:]
    SplitMix64(7).shuffle(second)
    assert first == second
    assert sorted(first) == items
    assert first != items  # astronomically unlikely to be identity


def test_derive_seed_varies_by_salt():
    base = 1234
    assert derive_seed(base, "init") != derive_seed(base, "epoch")
    assert derive_seed(base, "epoch", 0) != derive_seed(base, "epoch", 1)
    assert derive_seed(base, "epoch", 0) == derive_seed(base, "epoch", 0)


def test_stable_token_hash_is_seeded():
    assert stable_token_hash("abc", 1) == stable_token_hash("abc", 1)
    assert stable_token_hash("abc", 1) != stable_token_hash("abc", 2)
    assert stable_token_hash("abc", 1) != stable_token_hash("abd", 1)
