"""Versioned physical constants and component presets.

Every number the toolkit treats as a fixed fact of the modeled system lives
here, so simulations, calibration fixtures, and the performance models all
draw from a single source. Nothing in the package hard-codes these inline.
"""

import math

CONSTANTS_VERSION = "1"

# -- universal ---------------------------------------------------------------
C_LIGHT_M_S = 299792458.0

# -- optical carrier and waveguides ------------------------------------------
WAVELENGTH_M = 1564e-9
GROUP_INDEX = 4.2            # ridge geometry, conservative
AS_BUILT_PATH_M = 29.8e-3    # transmitter-to-receiver waveguide length
DEVICE_LENGTH_M = 500e-6     # per-device pitch assumed for optimized layouts

# -- thermal phase shifters ---------------------------------------------------
P_PI_W = 25e-3               # dissipated power per pi phase shift
HEATER_RESISTANCE_OHM = 250.0
HEATER_MAX_CURRENT_A = 24e-3

# -- per-MZI insertion loss ---------------------------------------------------
LOSS_DB_PER_MZI_MEAN = 0.22
LOSS_DB_PER_MZI_STD = 0.05

# -- transmitter crosstalk (reference magnitude of one measured coefficient) --
TX_CROSSTALK_M12 = -0.00735

# -- thermal crosstalk benchmark ----------------------------------------------
# off-diagonal coupling spread of the benchmark device, and its readout noise
CROSSTALK_SIGMA_BENCHMARK = 0.003
CROSSTALK_READOUT_NOISE = 1e-3

# -- microring / NOFU ---------------------------------------------------------
QUALITY_FACTOR = 8293.0
RING_RADIUS_M = 20e-6
RING_LENGTH_M = 2.0 * math.pi * RING_RADIUS_M
FSR_M = WAVELENGTH_M ** 2 / (GROUP_INDEX * RING_LENGTH_M)
LINEWIDTH_M = WAVELENGTH_M / QUALITY_FACTOR
FINESSE = FSR_M / LINEWIDTH_M
LINEWIDTH_PHASE_RAD = 2.0 * math.pi / FINESSE   # round-trip phase per linewidth
LINEWIDTH_CURRENT_A = 75e-6      # photocurrent that detunes by one linewidth
NOFU_BIAS_V = 0.8                # forward-bias operating voltage (injection)
NOFU_RESPONSIVITY_A_W = 1.0
NOFU_CARRIER_RESPONSE_S = 1e-9   # carrier-limited response time scale
NOFU_DEPLETION_CAP_F = 200e-15
NOFU_DEPLETION_DRIVE_V = 0.3
CAVITY_LIFETIME_S = 6.6e-12      # value used by the latency presets

# -- electrical component powers (per unit) -----------------------------------
DAC_1GHZ_W = 26e-3
DAC_50GHZ_W = 560e-3
TIA_1GHZ_W = 57e-3
TIA_50GHZ_W = 313e-3
ADC_1GHZ_W = 2.55e-3
ADC_50GHZ_W = 150e-3
THERMAL_PS_W = 37.5e-3       # average drive of one thermal phase shifter
UNDERCUT_PS_W = 3.75e-3      # thermally isolated (undercut) shifter
MEMS_PS_W = 75e-6
HEATER_DAC_W = 27.5e-6       # slow driver per heater
NOFU_INJECTION_W = NOFU_BIAS_V * LINEWIDTH_CURRENT_A        # 60 uW
NOFU_DEPLETION_J_PER_CLOCK = (
    NOFU_DEPLETION_CAP_F * NOFU_DEPLETION_DRIVE_V ** 2      # 18 fJ CV^2
)

# -- system shape -------------------------------------------------------------
N_MODES = 6
N_LAYERS = 3
CLOCK_AS_BUILT_HZ = 1e9
CLOCK_FAST_HZ = 50e9

# -- as-built accounting ------------------------------------------------------
# The demo system drives 132 heaters (3 meshes x 36, 12 ring tuners, 12
# transmitter shifters) through slow DACs; the phase-shifter power budget
# additionally carries 12 transmitter bias shifters, and 12 fast signal
# channels (6 in, 6 out) carry DAC/TIA/ADC electronics. Energy-per-op
# bookkeeping quotes the nominal end-to-end latency of the operating point.
PS_COUNT_AS_BUILT = 144
HEATER_DAC_COUNT_AS_BUILT = 132
SIGNAL_CHANNELS_AS_BUILT = 12
NOFU_COUNT_AS_BUILT = 12
AS_BUILT_LATENCY_NOMINAL_S = 435e-12

# -- training -----------------------------------------------------------------
LEARNING_RATE = 0.002
PERTURBATION = 0.05
QUANT_BITS = 16
TRAIN_SPLIT = 540
TEST_SPLIT = 294

# -- synthetic vowel generator ------------------------------------------------
# Speaker scale multiplies all formants of one utterance and cancels under
# per-vector max normalization; the jitter sets the post-normalization class
# overlap and is tuned so a small dense reference network tests in the low
# nineties.
SYNTH_SPEAKER_SIGMA = 0.06
SYNTH_JITTER = 0.045
SYNTH_DRIFT_LO = 0.92
SYNTH_DRIFT_HI = 1.08

# -- error-model presets ------------------------------------------------------
# Splitter-angle spread for the benchmark preset is tuned so that direct
# programming of Haar matrices lands at mean fidelity ~= 0.90; the corrected
# result is then a genuine prediction. Measured scaling: 1 - mean(F) ~= 5.2
# sigma^2 for N = 6, so sigma = 0.14 rad puts the population mean at 0.903.
SPLITTER_SIGMA_BENCHMARK = 0.14
SPLITTER_SIGMA_TWIN_TEST = 0.02
