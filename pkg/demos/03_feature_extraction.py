"""
The 53-feature vector of a single channel
=========================================

Extracts the canonical feature vector from a few analytic test signals
and prints the values grouped the way the feature table is organized.
"""

import numpy as np

from eegsweep import features as F

fs = 128.0
t = np.arange(int(8 * fs)) / fs

signals = {
    "10 Hz sine": np.sin(2 * np.pi * 10 * t),
    "white noise": np.random.default_rng(0).standard_normal(t.size),
    "6 Hz + noise": (np.sin(2 * np.pi * 6 * t)
                     + 0.3 * np.random.default_rng(1).standard_normal(t.size)),
}

GROUPS = (
    ("statistics", slice(0, 8)),
    ("time-domain complexity", slice(8, 17)),
    ("relative band power", slice(17, 21)),
    ("spectral shape", slice(21, 33)),
    ("wavelet energies", slice(33, 39)),
    ("Teager-Kaiser stats", slice(39, 53)),
)

for title, x in signals.items():
    vec = F.extract_channel(x, fs)
    print("=" * 60)
    print(title)
    for group, sl in GROUPS:
        print("  [%s]" % group)
        names = F.FEATURE_NAMES[sl]
        vals = vec[sl]
        for i in range(0, len(names), 3):
            row = "    ".join("%-22s %9.4f" % (n, v)
                              for n, v in zip(names[i:i + 3], vals[i:i + 3]))
            print("    " + row)

# a couple of properties worth knowing:
x = signals["white noise"]
v1 = F.extract_channel(x, fs)
v2 = F.extract_channel(5.0 * x, fs)
i_kurt = F.FEATURE_NAMES.index("kurtosis")
i_var = F.FEATURE_NAMES.index("variance")
print("=" * 60)
print("scaling by 5: kurtosis unchanged (%.4f -> %.4f), variance x25 "
      "(%.4f -> %.4f)" % (v1[i_kurt], v2[i_kurt], v1[i_var], v2[i_var]))
