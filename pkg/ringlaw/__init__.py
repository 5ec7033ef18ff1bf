"""ringlaw -- free convolutions, single ring densities and local law
experiments."""

VERSION = "0.1.0"
GENERATOR_ID = "numpy.PCG64/SeedSequence"
