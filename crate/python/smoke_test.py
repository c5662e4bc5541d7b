"""Smoke test for the cdc extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

from fractions import Fraction

import cdc


def main():
    assert cdc.l_coded(2, 1, 10) == Fraction(2, 5)
    assert cdc.l_uncoded("5/2", 10) == Fraction(3, 4)
    assert cdc.l_coded(10, 1, 10) == 0
    assert cdc.counting_identity(10, 3, 4)[2]
    # three nodes, every file on two of them
    assert cdc.lower_bound([0, 6, 0]) == Fraction(1, 6)

    gf = cdc.GaloisField(8)
    assert gf.mul(0x53, 0xCA) == 1
    assert gf.mul(7, gf.inv(7)) == 1
    try:
        gf.inv(0)
    except ValueError:
        pass
    else:
        raise AssertionError("zero inverted")

    holders = cdc.placement(3, 6, 2)
    assert holders == [[1, 2], [1, 2], [1, 3], [1, 3], [2, 3], [2, 3]], holders

    run = cdc.run_job(3, 3, 6, 2, value_bits=8)
    assert run["messages"] == 3 and run["load"] == Fraction(1, 6) and run["verified"]
    uncoded = cdc.run_job(3, 3, 6, 1, strategy="uncoded")
    assert uncoded["load"] == Fraction(2, 3)

    examples = cdc.replay_examples()
    assert all(e["passed"] for e in examples), examples
    assert examples[1]["message_bits"] == {2: 8, 4: 12}

    rows = cdc.sweep("K=5\nQ=5\nN=10\nr=1..5\nT=auto")
    assert all(row["measured"] == row["formula"] for row in rows)

    for row in cdc.coded_sort(4, 2, 2000):
        assert row["matches_oracle"], row

    print("smoke test passed")


if __name__ == "__main__":
    main()
