import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cattree.machine import (
    CatalyticState,
    SpaceLedger,
    bits_for,
    decode_tape,
    encode_tape,
    slot_width,
    tape_from_mode,
)
from cattree.modmath import PrimeBasis

B15 = PrimeBasis((3, 5))


def test_ledger_peak_tracking():
    led = SpaceLedger()
    with led.scope("a", 10):
        with led.scope("b", 5):
            assert led.current_free_bits == 15
        with led.scope("c", 20):
            pass
        assert led.current_free_bits == 10
    assert led.current_free_bits == 0
    assert led.peak_free_bits == 30


def test_ledger_lifo_enforced():
    led = SpaceLedger()
    led.push("a", 1)
    led.push("b", 1)
    with pytest.raises(RuntimeError):
        led.pop("a")


def test_ledger_rejects_negative():
    with pytest.raises(ValueError):
        SpaceLedger().push("x", -1)


def test_bits_for():
    assert bits_for(1) == 0
    assert bits_for(2) == 1
    assert bits_for(3) == 2
    assert bits_for(15) == 4
    assert bits_for(16) == 4


def test_tape_modes():
    assert not tape_from_mode("zeros", 4, 15).any()
    assert (tape_from_mode("max", 4, 15) == 14).all()
    alt = tape_from_mode("alternating", 2, 15)
    assert list(alt) == [0, 14, 0, 14, 0, 14]
    r1 = tape_from_mode("seeded-random", 4, 15, seed=3)
    r2 = tape_from_mode("seeded-random", 4, 15, seed=3)
    assert np.array_equal(r1, r2)
    with pytest.raises(ValueError):
        tape_from_mode("noise", 4, 15)


def test_state_validates_tape():
    with pytest.raises(ValueError):
        CatalyticState(B15, 4, np.full(12, 15, dtype=np.int64))
    with pytest.raises(ValueError):
        CatalyticState(B15, 4, np.zeros(11, dtype=np.int64))


def test_add_scaled_and_restore():
    st = CatalyticState(B15, 4, tape_from_mode("seeded-random", 4, 15, 1))
    vec = np.array([1, 2, 3, 4], dtype=np.int64)
    st.add_scaled("x", 7, vec)
    ok, _ = st.assert_restored(("x",))
    assert not ok
    st.add_scaled("x", 15 - 7, vec)
    ok, msg = st.assert_restored()
    assert ok and msg is None


def test_add_scaled_accepts_generators():
    st = CatalyticState(B15, 3)
    st.add_scaled("z", 1, (v for v in [1, 2, 3]))
    assert list(st.z) == [1, 2, 3]
    with pytest.raises(ValueError):
        st.add_scaled("z", 1, (v for v in [1, 2]))


def test_swap_is_free_of_copies():
    st = CatalyticState(B15, 3, np.arange(9, dtype=np.int64) % 15)
    x_before = st.x
    st.swap("x", "z")
    assert st.z is x_before
    st.swap("x", "z")
    assert st.x is x_before
    with pytest.raises(ValueError):
        st.swap("x", "x")


def test_assert_restored_reports_first_diff():
    st = CatalyticState(B15, 3)
    st.regs["y"][1] = 7
    ok, msg = st.assert_restored()
    assert not ok
    assert "y[1]" in msg


def test_snapshot_dump_load(tmp_path):
    st = CatalyticState(B15, 4, tape_from_mode("seeded-random", 4, 15, 2))
    p = tmp_path / "snap.txt"
    st.snapshot_dump(str(p))
    st.regs["x"][:] = 0
    st.snapshot_load(str(p))
    assert st.assert_restored()[0]


# -- bit-tape encoding ------------------------------------------------------


def test_slot_width():
    assert slot_width(9, 15) == 4 + 4 + 1
    assert slot_width(17, 3) == 2 + 5 + 1


def test_encode_decode_round_trip():
    import random

    rng = random.Random(0)
    for d, m in [(4, 3), (9, 15)]:
        w = slot_width(d, m)
        bits = [rng.getrandbits(1) for _ in range(3 * d * w)]
        enc = encode_tape(bits, d, m)
        assert decode_tape(enc) == bits
        vals = enc.values()
        assert vals.min() >= 0 and vals.max() < m


def test_encode_rejects_wrong_length():
    with pytest.raises(ValueError):
        encode_tape([0, 1], 4, 3)


@given(st.integers(min_value=0, max_value=2**60 - 1))
@settings(max_examples=50, deadline=None)
def test_encode_decode_property(seed):
    import random

    rng = random.Random(seed)
    d, m = 5, 15
    w = slot_width(d, m)
    bits = [rng.getrandbits(1) for _ in range(3 * d * w)]
    assert decode_tape(encode_tape(bits, d, m)) == bits
