# Core module for mfestimate
