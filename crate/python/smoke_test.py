"""Smoke test for the adaptp Python module."""

import math
import tempfile
from pathlib import Path

import adaptp


def main():
    atm = adaptp.isa(0.0)
    assert abs(atm["temperature_k"] - 288.15) < 1e-9
    assert abs(adaptp.tas_from_cas(250.0, 0.0) - 250.0) < 1e-6

    fleet = adaptp.synth_fleet()
    jet = next(c for c in fleet if c.type_code == "JB73")
    ref = adaptp.integrate_trajectory(jet, 10_000.0, 20_000.0, "climb")
    blips = ref.blips
    assert blips[0][1] == 10_000.0 and blips[-1][1] == 20_000.0
    assert all(b[3] > 0 for b in blips)

    model, cost = adaptp.fit_trajectory(ref)
    assert cost < 1.0, cost
    path = model.rollout(blips[0][1], blips[0][2], len(blips) - 1)
    assert len(path) == len(blips)

    corpus = adaptp.generate_corpus(days=5, seed=7)
    train, val, test = adaptp.split_by_day(corpus, (0.6, 0.2, 0.2), 7)
    assert len(train) + len(val) + len(test) == len(corpus)

    with tempfile.TemporaryDirectory() as d:
        csv = Path(d) / "corpus.csv"
        adaptp.write_corpus(corpus, str(csv))
        again = adaptp.read_corpus(str(csv))
        assert [t.id for t in again] == [t.id for t in corpus]

        prior = adaptp.build_prior(train, seed=7)
        assert len(prior) > 0
        prior.save(str(Path(d) / "prior.txt"))
        prior = adaptp.PriorSet.load(str(Path(d) / "prior.txt"))

    traj = next(t for t in test if t.aircraft_type == "JB73" and t.phase == "climb")
    pf = adaptp.LiuWestFilter(prior, "JB73", "climb", n_particles=200, seed=1)
    kf = adaptp.KalmanTracker("climb")
    for t, h, tas, rocd in traj.blips[:10]:
        step = pf.assimilate(h, tas)
        kf.assimilate(t, h, tas, rocd)
    pred = pf.predict_to(traj.h_target, "climb")
    remaining = traj.truth()[9][0]
    assert math.isfinite(pred["time_s"]) and pred["time_s"] > 0
    print(f"lwpf {pred['time_s']:.0f} s, kf {kf.predict_to(traj.h_target)[0]:.0f} s, truth {remaining:.0f} s, n_eff {step['n_eff']:.0f}")

    for method in ("bada_t0", "kf_tp", "lwpf"):
        rows = adaptp.evaluate(method, test, prior=prior, seed=7)
        overall = [r for r in rows if r["aircraft_type"] == "ALL"]
        assert overall, method
        print(method, ", ".join(f"{r['phase']} {r['mae_time_s']:.1f} s" for r in overall))

    try:
        adaptp.tas_from_cas(250.0, 90_000.0)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range altitude accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
