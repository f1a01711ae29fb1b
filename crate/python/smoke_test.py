"""Quick end-to-end check of the fastgate_py extension."""

import json

import fastgate_py as fg


def main():
    params = fg.TransmonParams()
    drag, f, leak = fg.drag_reference("x", 20)
    assert len(drag) == 20 and f > 0.999 and leak < 1e-3, (f, leak)

    sim = fg.simulate(drag, "x", params)
    assert abs(sim["fidelity"] - f) < 1e-12
    assert abs(sum(sim["populations"]) - 1.0) < 1e-10

    again = fg.Waveform.from_json(drag.to_json())
    assert again.segments == drag.segments
    assert abs(drag.gate_time - 20 * drag.tau) < 1e-12

    dev, agree = fg.qlearn_check(101, 200_000)
    assert agree and dev < 1e-2, dev

    d = fg.Designer("x", seed=0, config={"pretrain_passes": 3, "n_shot": 256})
    mse_x, _ = d.pretrain()
    assert len(mse_x) == 3
    logs = d.train(2)
    assert [l["iter"] for l in logs] == [0, 1] and d.iteration == 2
    w = d.synthesize(10)
    report = d.evaluate(w, shots=2000)
    assert report["n_segments"] == 10
    assert set(d.best()) == {10, 15, 20}

    state = d.state_json()
    d.load_state_json(state)
    assert json.loads(d.state_json()) == json.loads(state)
    print("smoke test ok:", json.dumps({k: round(v, 6) for k, v in report.items()}))


if __name__ == "__main__":
    main()
