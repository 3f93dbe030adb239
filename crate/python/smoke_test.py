"""Quick check of the Python bindings. Build and install first:

    maturin build --release --auditwheel skip -m crates/py/Cargo.toml -o dist
    pip install dist/delayline-*.whl
"""

import math

import delayline


def main():
    names = [name for name, _ in delayline.list_experiments()]
    assert names == ["kernel", "linear", "profile", "qubit", "oracle-compare", "trotter-order"], names

    try:
        delayline.parse_config("experiment = kernel\nkapa = 1\n")
    except ValueError as e:
        assert "kapa" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    out = delayline.run("experiment = kernel\nn_values = 3, 23\n")
    assert out.passed, out.checks
    assert set(out.series) == {"kernel_abs_n3", "kernel_abs_n23"}

    peak, width = delayline.kernel_peak_and_width(23, 22.0)
    assert abs(peak - 1.0) < 1e-12 and abs(width - math.sqrt(23) / 22) < 1e-12

    times, pop = delayline.delay_population(1.0, 1.0, 1.0, 2.0, dt=0.01)
    # Before the first delay the population simply decays.
    assert abs(pop[50] - math.exp(-2 * times[50])) < 1e-12

    grid, rows = delayline.photon_populations(7, 2.0)
    assert len(rows) == len(grid) and len(rows[0]) == 8
    assert abs(rows[0][0] - 1.0) < 1e-12 and sum(rows[-1]) < 1.0

    q = delayline.Qubit(3, math.pi, dt=2e-3, cutoff=1e-14)
    log = q.evolve(0.2, sample_every=10)
    assert len(log["time"]) == 11 and abs(q.time - 0.2) < 1e-12
    dense_t, dense_pop = delayline.dense_population(3, math.pi, 0.2, sample_interval=0.02)
    gap = max(abs(a - b) for a, b in zip(log["population"], dense_pop))
    assert gap < 1e-6, gap
    rho = q.local_density(0)
    assert abs(rho[0][0][0] + rho[1][1][0] - q.trace[0]) < 1e-12

    print("smoke test ok: mpdo vs dense gap %.2e, bond dims %s" % (gap, q.bond_dims))


if __name__ == "__main__":
    main()
