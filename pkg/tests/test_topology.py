import random

import pytest

from isoplan.topology import (TopologyError, load_topology, parse_network,
                              validate_network, wire_run_check)
from netgen import random_net_doc


def test_empty_document_is_a_valid_empty_topology():
    topo = load_topology("")
    assert not topo.nodes and not topo.sections and not topo.devices


def test_fourtrack_summary_counts(fourtrack):
    s = fourtrack.summary()
    assert s["supply_substations"] == 4
    assert s["equalizing_substations"] == 20
    assert s["tracks"] == 4
    assert s["plate_orders"] == 200
    assert s["keep_live_assets"] == 7


def test_section_crossing_phase_zones_rejected():
    doc = """
zone za
zone zb
track t1
node a za 0
node b zb 100
section s1 trolley track=t1 a b 0 100
"""
    _, parse_errs = parse_network(doc)
    assert not parse_errs
    with pytest.raises(TopologyError) as ei:
        load_topology(doc)
    assert any(e.code == "PHASE_CROSSING" for e in ei.value.errors)


def test_duplicate_and_dangling_ids_reported_with_lines():
    doc = """zone za
node a za 0
node a za 5
section s1 trolley track=t1 a missing 0 100
"""
    topo, errs = parse_network(doc)
    errs += validate_network(topo)
    codes = {e.code for e in errs}
    assert "DUPLICATE_ID" in codes and "DANGLING_REF" in codes
    dup = next(e for e in errs if e.code == "DUPLICATE_ID")
    assert dup.line == 3


def test_overlapping_trolley_sections_same_track_rejected():
    doc = """zone za
track t1
node a za 0
node b za 1000
node c za 500
node d za 1500
section s1 trolley track=t1 a b 0 1000
section s2 trolley track=t1 c d 500 1500
"""
    with pytest.raises(TopologyError) as ei:
        load_topology(doc)
    assert any(e.code == "OVERLAP" for e in ei.value.errors)


def test_device_rules():
    base = """zone za
track t1
node a za 0
node b za 100
section s1 trolley track=t1 a b 0 100
"""
    with pytest.raises(TopologyError) as ei:
        load_topology(base + "device d1 mod a b loadbreak=1\n")
    assert any(e.code == "DEVICE_LOADBREAK" for e in ei.value.errors)
    with pytest.raises(TopologyError) as ei:
        load_topology(base + "device d1 mod a b control=remote travel=9\n")
    assert any(e.code == "BAD_TRAVEL" for e in ei.value.errors)
    with pytest.raises(TopologyError) as ei:
        load_topology(base + "device d1 knife_switch a b rackable=1 control=manual\n")
    assert any(e.code == "BAD_RACKABLE" for e in ei.value.errors)


def test_parse_and_validate_are_separable_and_deterministic():
    rng = random.Random(7)
    for _ in range(25):
        doc = random_net_doc(rng)
        t1, e1 = parse_network(doc)
        t2, e2 = parse_network(doc)
        assert not e1 and not e2
        assert validate_network(t1) == validate_network(t2) == []
        assert sorted(t1.nodes) == sorted(t2.nodes)
        assert sorted(t1.sections) == sorted(t2.sections)
        assert {d.id: d for d in t1.devices.values()} == {d.id: d for d in t2.devices.values()}


def test_every_trolley_section_has_exactly_one_track(fourtrack):
    for sec in fourtrack.sections.values():
        if sec.kind == "trolley":
            assert sec.track in fourtrack.track_layout.tracks


# -- wire runs ----------------------------------------------------------------

def _chain_doc(lengths, joined=True):
    lines = ["zone za", "track t1"]
    ft = 0
    prev_end = None
    for i, ln in enumerate(lengths):
        a = prev_end if (joined and prev_end) else f"n{i}a"
        b = f"n{i}b"
        if not (joined and prev_end):
            lines.append(f"node {a} za {ft}")
        lines.append(f"node {b} za {ft + ln}")
        lines.append(f"section s{i} trolley track=t1 {a} {b} {ft} {ft + ln}")
        prev_end = b
        ft += ln
    return "\n".join(lines) + "\n"


def test_wire_run_single_short_section_clean():
    topo = load_topology(_chain_doc([5000]))
    assert wire_run_check(topo) == []


def test_wire_run_12000ft_joined_chain_flagged():
    topo = load_topology(_chain_doc([4000, 4000, 4000]))
    out = wire_run_check(topo)
    assert len(out) == 1
    v = out[0]
    assert v.length_ft == 12000 and v.track == "t1"
    assert v.sections == ("s0", "s1", "s2")


def test_wire_run_chain_with_insulated_joints_clean():
    # same lengths, but sections do not share nodes: each run is one section
    topo = load_topology(_chain_doc([4000, 4000, 4000], joined=False))
    assert wire_run_check(topo) == []


def test_wire_run_exhaustive_chain_oracle():
    # oracle: enumerate all contiguous sharing patterns on a 4-section chain
    rng = random.Random(11)
    for _ in range(40):
        lengths = [rng.choice((2000, 4000, 6000)) for _ in range(4)]
        share = [rng.random() < 0.5 for _ in range(3)]
        lines = ["zone za", "track t1"]
        ft = 0
        prev = None
        names = []
        for i, ln in enumerate(lengths):
            a = prev if (prev and share[i - 1]) else f"m{i}a"
            b = f"m{i}b"
            if not (prev and share[i - 1]):
                lines.append(f"node {a} za {ft}")
            lines.append(f"node {b} za {ft + ln}")
            lines.append(f"section c{i} trolley track=t1 {a} {b} {ft} {ft + ln}")
            names.append(f"c{i}")
            prev = b
            ft += ln
        topo = load_topology("\n".join(lines) + "\n")
        # oracle: walk runs by the sharing flags
        runs = []
        cur = [0]
        for i in range(1, 4):
            if share[i - 1]:
                cur.append(i)
            else:
                runs.append(cur)
                cur = [i]
        runs.append(cur)
        expect = []
        for run in runs:
            total = sum(lengths[i] for i in run)
            if total > 10560:
                expect.append(tuple(names[i] for i in run))
        got = [v.sections for v in wire_run_check(topo)]
        assert sorted(got) == sorted(expect), (lengths, share)


def test_fourtrack_wire_runs_compliant(fourtrack):
    assert wire_run_check(fourtrack) == []
