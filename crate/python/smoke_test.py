"""Quick end-to-end check of the pyantfdtd extension.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import math
import os
import tempfile

import pyantfdtd as af


def main():
    dt = af.cfl_timestep(0.2, 0.2, 0.2)
    assert abs(dt - 0.2e-3 / (299792458.0 * math.sqrt(3))) < 1e-25, dt
    assert af.total_cells([80, 140, 28], [0.2, 0.2, 0.2]) == 39_200_000
    assert af.param_names("dual_band_ifa") == ["a1", "a2", "s1", "s2"]

    sim = af.simulate("ifa", cell_mm=2.0, steps=800, cpml_cells=4)
    assert len(sim.freqs_hz) == 201 and len(sim.s11_db) == 201
    f, db = sim.resonance()
    print(f"ifa 2 mm / 800 steps: minimum {f / 1e9:.2f} GHz at {db:.1f} dB, cells {sim.cells}")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "tiny.antd")
        n = af.generate_dataset(path, "ifa", 6, seed=3, cell_mm=2.0, steps=600, cpml_cells=4)
        ds = af.Dataset(path)
        assert len(ds) == n and ds.family == "ifa"
        params, s11 = ds.record(0)
        assert len(params) == 2 and len(s11) == 201
        assert json.loads(ds.header_json())["master_seed"] == 3

        x, y = ds.matrices()
        train, test = af.split(len(x), 5, seed=1)
        xt = [x[i] for i in train]
        yt = [y[i] for i in train]
        linear = af.fit("linear", xt, yt)
        ridge = af.fit("ridge", xt, yt, alpha=0.1)
        mlp = af.fit("mlp", xt, yt, epochs=20, hidden=[16, 16])
        vote = af.voting([linear, ridge, mlp])
        pred = vote.predict([x[i] for i in test])
        assert len(pred) == len(test) and len(pred[0]) == 2

        mpath = os.path.join(tmp, "vote.antm")
        vote.save(mpath)
        again = af.Model.load(mpath)
        assert again.kind == "voting"
        assert again.predict([x[test[0]]]) == vote.predict([x[test[0]]])
        metrics = json.loads(again.evaluate([x[i] for i in test], [y[i] for i in test]))
        print("voting rmse per target:", metrics["rmse"])

    try:
        af.simulate("helix")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown family accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
