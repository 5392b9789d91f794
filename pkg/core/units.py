"""
Unit Conversions
Frequencies are given in THz/GHz and times in ps at the API; computations run in SI
"""
import math

THZ = 1e12
GHZ = 1e9
PS = 1e-12
NS = 1e-9
MHZ = 1e6

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Intensity FWHM of a Gaussian is FWHM_PER_SIGMA times its rms width
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Time-bandwidth product of a transform-limited Gaussian pulse (intensity FWHMs)
GAUSSIAN_TBP = 2.0 * math.log(2.0) / math.pi


def wavelength_nm_to_thz(wavelength_nm: float) -> float:
    """Vacuum wavelength in nm to optical frequency in THz"""
    return SPEED_OF_LIGHT / (wavelength_nm * 1e-9) / THZ


def fwhm_to_sigma(fwhm: float) -> float:
    """Intensity FWHM to intensity rms width (same units)"""
    return fwhm / FWHM_PER_SIGMA
