import numpy as np
import pytest

from diamondrelay.channel import build_partition

TABLE_SNRS_DB = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)

# quoted 16-level maximum rates; three entries (marked) disagree with the
# closed form by more than the table's own rounding and are treated as
# transcription errors: (2 dB, rank 5), (4 dB, rank 1), (8 dB, rank 10)
QUOTED_RATES = {
    0.0: [0.025, 0.07, 0.115, 0.16, 0.205, 0.255, 0.305, 0.355,
          0.405, 0.465, 0.525, 0.59, 0.67, 0.76, 0.88, 1.015],
    2.0: [0.035, 0.105, 0.17, 0.24, 0.32, 0.37, 0.435, 0.50,
          0.57, 0.64, 0.715, 0.795, 0.885, 0.99, 1.13, 1.28],
    4.0: [0.0505, 0.16, 0.255, 0.35, 0.435, 0.52, 0.605, 0.685,
          0.77, 0.855, 0.94, 1.035, 1.135, 1.255, 1.40, 1.565],
    6.0: [0.085, 0.24, 0.375, 0.495, 0.605, 0.71, 0.81, 0.91,
          1.00, 1.10, 1.195, 1.30, 1.41, 1.535, 1.695, 1.865],
    8.0: [0.13, 0.35, 0.525, 0.68, 0.815, 0.935, 1.05, 1.16,
          1.265, 1.355, 1.475, 1.585, 1.705, 1.835, 2.005, 2.175],
    10.0: [0.20, 0.495, 0.715, 0.90, 1.055, 1.19, 1.32, 1.435,
           1.55, 1.66, 1.775, 1.89, 2.01, 2.15, 2.32, 2.495],
}
QUOTED_OUTLIERS = {(2.0, 5), (4.0, 1), (8.0, 10)}  # (snr_db, 1-indexed rank)

# stable rows of the quoted 6 dB planning table: (U, u, D, d) -> (delay, gain)
QUOTED_PLAN_ROWS = {
    (16, 14, 3, 1): (6.68, 0.0199),
    (16, 15, 3, 1): (15.08, 0.0269),
    (16, 15, 3, 2): (17.27, 0.0311),
    (15, 15, 3, 2): (29.38, 0.0465),
}
QUOTED_UNSTABLE_ROW = (15, 15, 2, 2)


@pytest.fixture(scope="session")
def part6():
    return build_partition(6.0, 16)


@pytest.fixture(scope="session")
def parts_by_snr():
    return {db: build_partition(db, 16) for db in TABLE_SNRS_DB}


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
