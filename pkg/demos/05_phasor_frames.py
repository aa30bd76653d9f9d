"""Binary measurement frames: layout, checksums, corruption detection.

Run: python3 demos/05_phasor_frames.py
"""

from gridops.phasor import (
    ChecksumError, crc_ccitt, decode_frame, encode_config_frame, encode_data_frame,
)

frame = encode_data_frame(
    phasors=[(1.02, 0.0), (0.98, -0.12), (0.99, -0.31)],
    idcode=7, soc=1_700_000_000, fracsec=(0 << 24) | 8_388_608,  # +0.5 s
    freq_dev=-0.015,
)
print("data frame:", frame.hex(" "))
print("crc of 0x" + frame[:-2].hex(), "=", hex(crc_ccitt(frame[:-2])))

decoded = decode_frame(frame)
print("\ndecoded: id", decoded.idcode, "soc", decoded.soc,
      "fraction", decoded.fraction / (1 << 24), "s")
for i, (mag, ang) in enumerate(decoded.phasors):
    print(f"  phasor {i}: {mag:.4f} pu / {ang:.4f} rad")
print("  freq deviation:", decoded.freq_dev, "Hz")

config = decode_frame(encode_config_frame(channel_count=3, data_rate=30,
                                          idcode=7, soc=0, fracsec=0))
print("\nconfig frame: channels", config.channel_count, "rate", config.data_rate, "fps")

# flip one bit anywhere and the checksum catches it
corrupt = bytearray(frame)
corrupt[9] ^= 0x01
try:
    decode_frame(bytes(corrupt))
except ChecksumError as e:
    print("\ncorrupted frame rejected:", e)
