# coding: utf-8

# # Link budget building blocks
#
# DECT-2020 NR timing, the TR 38.901 pathloss families and the PER curve
# that decides whether a frame decodes. Everything here is closed form.

import numpy as np

from dectsim.numerology import (FRAME_TICKS, SLOT_TICKS, SYMBOL_TICKS, TICKS_PER_SECOND,
                                QPSK_3_4, channel_bandwidth)
from dectsim.propagation import (LinkClass, PerModel, los_probability, noise_floor_dbm,
                                 pathloss_db, sensitivity_dbm)

# ## Numerology
#
# Bandwidth is subcarrier spacing x 64 x beta. The simulator counts time in
# integer ticks of 1/576000 s, so every DECT-2020 boundary is exact.

for mu, beta in [(1, 1), (2, 1), (8, 16)]:
    print(f"mu={mu} beta={beta}: {channel_bandwidth(mu, beta) / 1e6:.3f} MHz")

print("ticks per second", TICKS_PER_SECOND)
# two subslots per slot by default
print("symbol / subslot / slot / frame ticks", SYMBOL_TICKS, SLOT_TICKS // 2, SLOT_TICKS,
      FRAME_TICKS)

# ## Pathloss
#
# Sink-to-node links use UMa from 25 m, node-to-node links use UMi street
# canyon at 1.5 m and indoor pairs use InH. LOS probability falls with range.

fc = 1.9
for d in (20.0, 100.0, 400.0):
    uma = pathloss_db(LinkClass.UMA, False, d, fc, 25.0, 1.5)
    umi = pathloss_db(LinkClass.UMI, True, d, fc, 1.5, 1.5)
    p = los_probability(LinkClass.UMI, d)
    print(f"{d:5.0f} m  UMa NLOS {uma:6.1f} dB  UMi LOS {umi:6.1f} dB  P(LOS, UMi) {p:.2f}")

# ## PER and sensitivity
#
# A logistic curve centred 3 dB above the Shannon threshold of QPSK 3/4.
# Sensitivity is the received power at which a slot decodes 90% of the time.

model = PerModel.for_mcs(QPSK_3_4)
noise = noise_floor_dbm(channel_bandwidth(1, 1), 7.0)
for s in np.arange(0.0, 12.0, 2.0):
    print(f"SINR {s:4.1f} dB  PER {model(s):.4f}")
print(f"noise floor {noise:.2f} dBm, sensitivity {sensitivity_dbm(noise, model):.2f} dBm")
