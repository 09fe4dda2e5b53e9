"""irplab: dynamic-scene capture simulation and restoration-potential prediction.

Pipeline: simulate captures across an exposure ladder (`imaging`,
`scenes`), label them with classical restoration oracles (`restore`,
`metrics`), train a three-branch selective-fusion predictor (`nn`,
`predictor`), then evaluate and apply it (`apps`, `cli`).
"""

__version__ = "0.1.0"
