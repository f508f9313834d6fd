"""
npLCM regression engine
Nested partially-latent class models with covariate-dependent etiology fractions
"""

__version__ = "1.0.0"
SCHEMA_VERSION = "1.0"
