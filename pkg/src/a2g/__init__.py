"""Urban air-to-ground mmWave channel toolkit.

Layout generation (:mod:`a2g.urbgen`), geometric LoS campaigns
(:mod:`a2g.geomlos`), the sigmoid LoS-probability and height-dependent
fading models (:mod:`a2g.plosmod`, :mod:`a2g.lsfmod`), parameter extraction
(:mod:`a2g.extract`) and validation metrics (:mod:`a2g.validate`).
"""

__version__ = "0.1.0"
