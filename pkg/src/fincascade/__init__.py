"""fincascade: default contagion and fire sales in heavy-tailed financial networks.

The library models a financial system as a random directed network of
exposures between institutions that also hold marketable assets.  It
provides

* vertex laws (finitary and Pareto-tailed) and expectation machinery,
* weighted-Poisson threshold functionals,
* finite-system sampling, network generation and cascade engines
  (default contagion, fire sales, and the joint cascade),
* fixed-point solvers for the asymptotic final state,
* resilience classification and capital-requirement calculators,
* a CLI for reproducible experiments.
"""
from .laws import (FinitaryLaw, ParetoLaw, VertexClass, empirical_law, expect,
                   law_from_spec, law_to_spec, sample_system)
from .poisson import (WeightedPoissonSpec, phi_general, phi_point, psi_general,
                      psi_tail, weighted_sum_pmf)
from .rules import (Combined, ConstCapital, HoldingsLinear, MultiTypePower,
                    PowerThreshold, RobustLargest, eval_capital_rule)
from .systems import (CrossImpact, FinancialSystem, IndicatorAtDefault,
                      LeverageLinear, LinearImpact, LogLinearImpact,
                      PiecewiseMonotone, PowerBoundedImpact, PowerSale,
                      ShockRule, eval_impact, eval_sale, ex_post_default,
                      exogenous_asset_shock, load_system, save_system)

__version__ = "0.1.0"
