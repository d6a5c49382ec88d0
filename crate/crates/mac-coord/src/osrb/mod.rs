//! Random-binning protocol simulation (in progress).
