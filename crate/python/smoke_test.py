"""Smoke test for the pointwave_py extension module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/pointwave_py-*.whl
"""

import math

import pointwave_py as pw


def main():
    tuned = ([(0.0, 0.0, 0.0)], [-1.0 / (4.0 * math.pi)])
    states = pw.bound_states(*tuned)
    assert len(states) == 1, states
    lam0, energy, norm_sq = states[0]
    assert abs(lam0 - 1.0) < 1e-10 and abs(energy + 1.0) < 1e-10
    assert abs(norm_sq - 1.0 / (8.0 * math.pi)) < 1e-12
    assert pw.bound_states([(0.0, 0.0, 0.0)], [0.5]) == []

    lam, tail = pw.multiplier_tail([(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)], [0.3, -0.1])
    assert tail < 1e-2, (lam, tail)

    u = (1.0, 0.8, (0.2, 0.0, -0.1))
    v = (0.6, 1.1, (0.0, 0.3, 0.0))
    repulsive = ([(0.0, 0.0, 0.0)], [1.0])
    ratio = pw.norm_ratio(*repulsive, u)
    assert abs(ratio - 1.0) < 1e-5, ratio
    plus = pw.wave_pairing(*repulsive, u, v)
    minus = pw.wave_pairing(*repulsive, u, v, sign="minus")
    assert isinstance(plus, complex)
    # real data: W⁻ is the complex conjugate of W⁺
    assert abs(plus - minus.conjugate()) < 1e-12

    a = pw.resonance_constant()
    assert abs(a - 4.0 * math.sqrt(2.0 / math.pi)) < 1e-6
    residuals = [r for _, r in pw.rank_one_residuals([0.2, 0.1, 0.05])]
    assert residuals[0] > residuals[1] > residuals[2], residuals

    exponent = pw.dispersive_exponent(*repulsive, (1.0, 1.0, (0.0, 0.0, 0.0)))
    assert abs(exponent + 0.3) < 0.06, exponent

    try:
        pw.resonance_constant(depth=-2.6)
    except ValueError as e:
        assert "resonance" in str(e)
    else:
        raise AssertionError("detuned well accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
