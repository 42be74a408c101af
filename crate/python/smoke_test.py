"""Quick end-to-end check of the Python bindings."""

import tempfile
from pathlib import Path

import choir

SCENARIO = """
duration_s = 4
warmup_s = 1
seed = 5

[[flows]]
replicas = 2
wired_nd_ms = 5
"""


def main():
    fb = choir.encode_rate(30e6)
    assert len(fb) == 4
    back = choir.decode_rate(fb)
    assert abs(back - 30e6) / 30e6 < 5e-4, back
    assert choir.decode_rate(b"\x00\x00\x00\x00") is None
    assert choir.jain_index([10, 0, 0, 0]) == 0.25
    assert choir.guidance_bw(1000.0, 1660.0, 16.6) == 850.0

    scn = choir.Scenario(SCENARIO)
    assert scn.flow_count == 2
    result = scn.run()
    m = result.metrics
    assert len(m.flows) == 2 and m.jain > 0.95, m
    for f in m.flows:
        assert f["p999_ms"] >= f["p95_ms"] > 0
        assert f["avg_mbps"] > 1
    print(m.to_csv(), end="")

    again = choir.Scenario(SCENARIO).run().metrics.to_csv()
    assert again == m.to_csv(), "runs with the same seed must match"

    with tempfile.TemporaryDirectory() as d:
        result.write(d)
        assert (Path(d) / "events.csv").is_file()
        [(_, replayed)] = choir.report(d)
        assert replayed.to_csv() == m.to_csv()

    sim = scn.simulation()
    slots = "".join(sim.step()[1] for _ in range(5))
    assert slots == "DDDSU", slots
    sim.run_until(1_000_000)
    assert sim.alloc_bw(0) > 0 and sim.guidance(0) >= 0
    try:
        sim.queue_bytes(7)
    except ValueError:
        pass
    else:
        raise AssertionError("bad flow index accepted")

    sweep = scn.sweep("wired_nd", ["1", "20"])
    assert [v for v, _ in sweep] == ["1", "20"]

    try:
        choir.Scenario("[[flows]]\ncontroller = 'copa'\n")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("unknown controller accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
