"""Power Doppler imaging with null subtraction imaging (NSI) beamforming."""
