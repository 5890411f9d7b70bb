import numpy as np
import pytest

from relaylab.channel import AntennaConfig, ChannelRealization, PowerConstraints, Topology, realization
from relaylab.fullduplex import cutset_rate, direct_capacity
from relaylab.halfduplex import _perspective, hcs_rate, hdf_rate, twohop_rate
from relaylab.hermitian import waterfill
from relaylab.oracles import ScalarInstance, hcs_oracle, hdf_oracle, twohop_oracle

from conftest import LN2

PC = PowerConstraints(1.0, 1.0)
TOL_BITS = 2e-6 / LN2

# frozen oracle values (bits) for h11=1, h21=2, h12=2, P1=P2=1
HCS_ORACLE_BITS = 2.133277
HDF_ORACLE_BITS = 1.980134


def chan(seed, m=2, topo=Topology()):
    return realization(AntennaConfig(m, m, m, m), topo, seed, 0)


def twohop_bisection(ch, pc):
    """Independent MIMO oracle: equalize w1*C(H21, P1/w1) and (1-w1)*C(H12, P2/(1-w1))."""
    l21 = np.linalg.svd(ch.h21, compute_uv=False) ** 2
    l12 = np.linalg.svd(ch.h12, compute_uv=False) ** 2

    def hop(lam, p, w):
        return w * waterfill(lam, p / w)[1] if w > 0 else 0.0

    lo, hi = 0.0, 1.0
    for _ in range(200):
        w = 0.5 * (lo + hi)
        if hop(l21, pc.p1, w) < hop(l12, pc.p2, 1 - w):
            lo = w
        else:
            hi = w
    return hop(l21, pc.p1, lo)


def test_frozen_oracle_values():
    inst = ScalarInstance(1, 2, 2)
    assert hcs_oracle(inst) / LN2 == pytest.approx(HCS_ORACLE_BITS, abs=1e-6)
    assert hdf_oracle(inst) / LN2 == pytest.approx(HDF_ORACLE_BITS, abs=1e-6)


def test_scalar_instance_against_oracle():
    ch = ChannelRealization.scalar(1, 2, 2)
    assert abs(hcs_rate(ch, PC).rate_bits - HCS_ORACLE_BITS) < 1e-3
    assert abs(hdf_rate(ch, PC).rate_bits - HDF_ORACLE_BITS) < 1e-3


def test_twohop_symmetric():
    sol = twohop_rate(ChannelRealization.scalar(0, 1, 1), PC)
    assert sol.rate_bits == pytest.approx(0.5 * np.log2(3), abs=1e-5)
    assert sol.bands.w1 == pytest.approx(0.5, abs=1e-4)


def test_twohop_asymmetric_grid():
    inst = ScalarInstance(0.3, 2, 1)
    val, w1 = twohop_oracle(inst)
    sol = twohop_rate(ChannelRealization.scalar(0.3, 2, 1), PC)
    assert abs(sol.rate_bits - val / LN2) < 1e-3
    assert sol.bands.w1 == pytest.approx(w1, abs=1e-3)


def test_twohop_mimo_bisection_oracle():
    ch = chan(3)
    assert abs(twohop_rate(ch, PC).rate_nats - twohop_bisection(ch, PC)) / LN2 < 1e-4


def test_hdf_symmetric_reduces_to_twohop():
    ch = ChannelRealization.scalar(0, 1, 1)
    assert hdf_rate(ch, PC).rate_bits == pytest.approx(0.5 * np.log2(3), abs=1e-4)


def test_disconnected_relay_hcs_equals_direct():
    ch = chan(1)
    z = np.zeros((2, 2))
    cut = ChannelRealization(ch.h11, z, z)
    assert abs(hcs_rate(cut, PC).rate_bits - direct_capacity(cut, PC).rate_bits) < 1e-3


def test_zero_cases():
    ch = chan(2)
    assert hcs_rate(ch, PowerConstraints(0.0, 1.0)).rate_nats == 0.0
    z = np.zeros((2, 2))
    no_sr = ChannelRealization(ch.h11, z, ch.h12)
    assert hdf_rate(no_sr, PC).rate_bits < 1e-5
    assert twohop_rate(no_sr, PC).rate_bits < 1e-5


@pytest.mark.parametrize("seed", range(3))
def test_dominance_chain(seed):
    ch = chan(seed)
    two, hdf, hcs = twohop_rate(ch, PC), hdf_rate(ch, PC), hcs_rate(ch, PC)
    cs = cutset_rate(ch, PC)
    assert two.rate_bits <= hdf.rate_bits + TOL_BITS
    assert hdf.rate_bits <= hcs.rate_bits + TOL_BITS
    assert hcs.rate_bits <= cs.rate_bits + TOL_BITS


@pytest.mark.parametrize("seed", range(3))
def test_bandwidth_complementarity(seed):
    ch = chan(seed)
    for fn in (hcs_rate, hdf_rate, twohop_rate):
        b = fn(ch, PC).bands
        assert b.w1 + b.w2 == pytest.approx(1.0, abs=1e-6)


def test_perspective_monotone_on_solution_data():
    ch = chan(4)
    sol = hdf_rate(ch, PC)
    q1 = sol.values["Q11_band1"]
    vals = [_perspective(w, ch.h11, q1) for w in np.linspace(0.05, 1.0, 20)]
    assert np.all(np.diff(vals) >= -1e-12)


def test_components_reproduce_rate():
    ch = chan(5)
    sol = hcs_rate(ch, PC)
    c = sol.components
    assert sol.rate_nats == pytest.approx(max(0.0, min(c["R1"] + c["R2"], c["Rd"] + c["Rc"])), abs=1e-12)
    sol = hdf_rate(ch, PC)
    c = sol.components
    assert sol.rate_nats == pytest.approx(min(c["Rr"], c["Rd"] + c["Rc"]), abs=1e-12)


def test_per_antenna_never_helps():
    ch = chan(6)
    for fn in (hcs_rate, hdf_rate, twohop_rate):
        assert fn(ch, PC, per_antenna=True).rate_bits <= fn(ch, PC).rate_bits + TOL_BITS


def test_relay_near_destination_takes_band_one():
    near_dst = chan(7, topo=Topology(1.0, 0.1))
    near_src = chan(7, topo=Topology(0.0, 0.1))
    assert hdf_rate(near_dst, PC).bands.w1 > hdf_rate(near_src, PC).bands.w1
