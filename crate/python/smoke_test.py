"""Smoke test for the qite_py extension module.

Build and install first:

    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/qite_py-*.whl
"""

import math

import qite_py as q


def main():
    p = q.PauliString("XYZI")
    k, s = p.multiply(q.PauliString("YIZI"))
    assert (k, str(s)) == (1, "ZYII"), (k, s)
    assert p.weight == 3 and p.support() == [0, 1, 2]

    petersen = q.Graph.named("petersen")
    e_gs, ground, levels = q.spectrum(petersen)
    assert e_gs == -12.0 and len(ground) == 10
    assert sum(d for _, d in levels) == 2**10

    assert len(q.pool(q.Graph.named("regular3", 10), "nla", 2)) == 435
    assert len(q.pool(petersen, "ela", 3, term=0)) == 207
    assert len(q.interaction_qubits(petersen, 0)) == 4

    k4 = q.Graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    t = q.run_qite(k4, "nla", 2, dtau=0.1, n_steps=50)
    assert all(b <= a + 1e-9 for a, b in zip(t.energies, t.energies[1:]))
    assert t.final_energy < -3.99, t
    assert abs(sum(abs(a) ** 2 for a in t.final_state) - 1.0) < 1e-10
    assert all(abs(sum(w for _, w in pop) - 1.0) < 1e-10 for pop in t.populations)

    ideal, noisy, depth = t.replay()
    assert math.isclose(ideal, t.final_energy, abs_tol=1e-9)
    assert noisy > ideal and depth > 0

    c = q.run_qite(k4, "nla", 2, dtau=0.5, n_steps=10, compress=True)
    assert 0 < len(c.blocks) <= 10

    gates, cnots, depth, bound = q.resources(petersen, "nla", 2)
    assert cnots < gates and depth <= gates and bound == 720

    try:
        q.run_qite(petersen, "la", 4, n_steps=1)
    except ValueError as e:
        assert "LA" in str(e)
    else:
        raise AssertionError("invalid LA domain accepted")

    print("qite_py smoke test passed:", t, c)


if __name__ == "__main__":
    main()
