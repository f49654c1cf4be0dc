"""Child-seed derivation from a single 64-bit master seed.

Rule: ``child = splitmix64((master XOR PURPOSE[purpose]) + index * GOLDEN)``
with all arithmetic modulo 2**64. The purpose constants below are frozen;
changing one changes every derived stream and therefore every report.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

PURPOSES = {
    "repeat": 0x5245504541540001,
    "split": 0x53504C4954000002,
    "train": 0x545241494E000003,
    "synthetic": 0x53594E5448000004,
}


def splitmix64(z):
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, purpose, index=0):
    if purpose not in PURPOSES:
        raise KeyError(f"unknown seed purpose {purpose!r}")
    z = ((int(master) & MASK64) ^ PURPOSES[purpose]) + int(index) * GOLDEN
    return splitmix64(z & MASK64)
