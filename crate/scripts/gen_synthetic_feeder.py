#!/usr/bin/env python3
"""Generate the large synthetic feeder case (1417 buses, 1244 lines).

The layout is a 12.47 kV primary trunk with branching laterals, 172
service transformers and short 480 V secondary runs.  Output is
deterministic for a given seed.
"""
import argparse
import random

PRIMARY_LINES = 600
TRANSFORMERS = 172
SECONDARY_LINES = 1244 - PRIMARY_LINES


def build(seed):
    rng = random.Random(seed)
    out = [
        "! Synthetic urban feeder: 12.47 kV primary, 172 service transformers,",
        "! 480 V secondaries.  Generated by scripts/gen_synthetic_feeder.py.",
        "",
        "Clear",
        "New Circuit.synthetic bus1=sub basekv=12.47 pu=1.03 mvasc3=250 mvasc1=220",
        "",
        "New Linecode.trunk nphases=3 units=kft r1=0.0306 x1=0.0627 r0=0.0900 x0=0.1900",
        "New Linecode.lat nphases=3 units=kft r1=0.0652 x1=0.0880 r0=0.1800 x0=0.2600",
        "New Linecode.lat1 nphases=1 units=kft rmatrix=[0.1300] xmatrix=[0.1100]",
        "New Linecode.sec nphases=3 units=kft r1=0.0500 x1=0.0300 r0=0.1000 x0=0.0600",
        "",
    ]
    # primary tree: node 0 is the substation bus
    three_phase = {"sub": True}
    nodes = ["sub"]
    parents = {}
    lines = []
    trunk = ["sub"]
    for k in range(1, PRIMARY_LINES + 1):
        name = f"p{k}"
        if k <= 60:
            parent = trunk[-1]
            trunk.append(name)
            code = "trunk"
        else:
            cands = [n for n in nodes if three_phase[n]]
            parent = cands[rng.randrange(len(cands))] if rng.random() < 0.3 else nodes[-1 - rng.randrange(min(8, len(nodes)))]
            code = "lat"
        if not three_phase[parent]:
            code = "lat1"
        elif code == "lat" and rng.random() < 0.08:
            code = "lat1"
        three_phase[name] = code != "lat1"
        parents[name] = parent
        nodes.append(name)
        lines.append((f"pl{k}", parent, name, code, rng.uniform(0.2, 1.2)))
    phase_of = {}
    for ln, a, b, code, kft in lines:
        if code == "lat1":
            ph = phase_of.get(a) or rng.choice([1, 2, 3])
            phase_of[b] = ph
            out.append(f"New Line.{ln} bus1={a}.{ph} bus2={b}.{ph} phases=1 linecode=lat1 length={kft:.3f} units=kft")
        else:
            out.append(f"New Line.{ln} bus1={a} bus2={b} linecode={code} length={kft:.3f} units=kft")
    out.append("")
    # service transformers on three-phase primary buses
    hosts = [n for n in nodes[1:] if three_phase[n]]
    rng.shuffle(hosts)
    hosts = sorted(hosts[:TRANSFORMERS], key=lambda n: int(n[1:]))
    extra = SECONDARY_LINES - 3 * TRANSFORMERS
    sec_count = 0
    loads = []
    for t, host in enumerate(hosts):
        s0 = f"t{t + 1}s"
        out.append(
            f"New Transformer.t{t + 1} phases=3 windings=2 buses=[{host} {s0}] conns=[delta wye] "
            f"kvs=[12.47 0.48] kvas=[300 300] xhl=4.5 %rs=[0.6 0.6]"
        )
        n_sec = 3 + (1 if t < extra else 0)
        prev = s0
        for j in range(n_sec):
            sec_count += 1
            b = f"t{t + 1}s{j + 1}"
            out.append(f"New Line.sl{sec_count} bus1={prev} bus2={b} linecode=sec length={rng.uniform(0.05, 0.25):.3f} units=kft")
            loads.append((b, rng.uniform(6, 18)))
            prev = b
    out.append("")
    # single-phase laterals carry small wye loads
    for n in nodes[1:]:
        if not three_phase[n] and rng.random() < 0.6:
            loads.append((f"{n}.{phase_of[n]}", rng.uniform(5, 20)))
    for k, (bus, kw) in enumerate(loads):
        model = rng.choice([1, 1, 2, 5])
        if "." in bus:
            out.append(f"New Load.ld{k + 1} bus1={bus} phases=1 kw={kw:.1f} pf=0.95 model={model}")
        else:
            out.append(f"New Load.ld{k + 1} bus1={bus} kw={kw:.1f} pf=0.95 model={model}")
    out.append("")
    for k, t in enumerate(rng.sample(range(1, TRANSFORMERS + 1), 12)):
        out.append(f"New PVSystem.pv{k + 1} bus1=t{t}s kva=100 pmpp=100 pf=1")
    out.append("")
    out.append("New Relay.relay_sub monitoredobj=line.pl1 monitoredterm=1")
    out.append("New Relay.relay_mid monitoredobj=line.pl31 monitoredterm=1")
    out.append("")
    return "\n".join(out), sec_count


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1417)
    ap.add_argument("-o", "--output", default="crates/core/cases/synthetic_feeder.dss")
    args = ap.parse_args()
    text, sec = build(args.seed)
    assert sec == SECONDARY_LINES
    with open(args.output, "w") as f:
        f.write(text)


if __name__ == "__main__":
    main()
